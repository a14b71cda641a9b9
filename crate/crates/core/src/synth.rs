//! Synthetic interleaved chat with gold reply-to links.
//!
//! Each thread is a question from one participant answered by another; the
//! two alternate and every reply points at the other participant's last
//! message. Threads are interleaved, replies may be prefixed with the
//! addressee's nick, and join/quit notices are sprinkled in as self-links.
//! The clock advances one minute per line.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ChatFile, LinkAnnotation, Timestamp, Utterance, SYSTEM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub threads: usize,
    /// Total lines, system notices included.
    pub utterances: usize,
    /// Probability that a reply starts with `nick:` of its parent's speaker.
    pub mention_rate: f64,
    /// Share of lines that are join/quit notices.
    pub system_rate: f64,
    /// Threads running at the same time.
    pub max_active: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            threads: 20,
            utterances: 200,
            mention_rate: 0.8,
            system_rate: 0.0,
            max_active: 4,
            seed: 1,
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "zu", "ra", "ne", "to", "vi", "sa", "de", "bo", "ju", "pe", "xa", "ri", "go",
];

const TOPICS: &[&[&str]] = &[
    &["grub", "bootloader", "partition", "uefi", "efi", "menu", "chainload", "dualboot"],
    &["wifi", "driver", "broadcom", "adapter", "firmware", "wpa", "signal", "hotspot"],
    &["nvidia", "xorg", "resolution", "monitor", "compositor", "screen", "vsync", "display"],
    &["apt", "dpkg", "repository", "ppa", "upgrade", "dependency", "held", "package"],
    &["sound", "pulseaudio", "alsa", "speaker", "headphone", "mixer", "volume", "hdmi"],
    &["mount", "fstab", "ntfs", "usb", "disk", "uuid", "ext4", "permissions"],
    &["ssh", "key", "port", "firewall", "ufw", "sshd", "login", "tunnel"],
    &["python", "pip", "virtualenv", "module", "import", "interpreter", "venv", "version"],
    &["samba", "share", "workgroup", "smb", "cifs", "network", "folder", "guest"],
    &["kernel", "module", "dkms", "headers", "modprobe", "panic", "initramfs", "lsmod"],
    &["swap", "memory", "ram", "swappiness", "hibernate", "zram", "oom", "swapfile"],
    &["cron", "crontab", "schedule", "script", "systemd", "timer", "job", "daemon"],
];

const FILLER: &[&str] = &[
    "i", "the", "it", "my", "is", "how", "do", "try", "with", "when", "after", "not", "you", "can", "check",
    "then", "still", "works",
];

fn make_nick(rng: &mut impl Rng, taken: &mut Vec<String>) -> String {
    loop {
        let parts = rng.gen_range(2..=3);
        let mut nick: String = (0..parts).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect();
        if rng.gen_bool(0.3) {
            nick.push_str(&rng.gen_range(1..100).to_string());
        }
        if !taken.contains(&nick) {
            taken.push(nick.clone());
            return nick;
        }
    }
}

fn sentence(rng: &mut impl Rng, topic: &[&str], question: bool) -> String {
    let len = rng.gen_range(4..=8);
    let mut words: Vec<&str> = (0..len)
        .map(|k| {
            if k % 2 == 0 || rng.gen_bool(0.5) {
                *topic.choose(rng).expect("topic")
            } else {
                *FILLER.choose(rng).expect("filler")
            }
        })
        .collect();
    if question {
        words.insert(0, "how");
        words.push("?");
    }
    words.join(" ")
}

struct Thread {
    topic: &'static [&'static str],
    nicks: [String; 2],
    /// Lines still to emit.
    remaining: usize,
    /// Lines emitted so far and the index of the last one.
    emitted: usize,
    last: usize,
}

/// Generates one annotated file named `name`.
pub fn gen_synth(config: &SynthConfig, name: &str) -> Result<ChatFile> {
    if config.threads < 1 || config.utterances < config.threads {
        return Err(Error::Contract(format!(
            "need threads >= 1 and utterances >= threads, got {} threads and {} utterances",
            config.threads, config.utterances
        )));
    }
    if !(0.0..=1.0).contains(&config.mention_rate) || !(0.0..1.0).contains(&config.system_rate) {
        return Err(Error::Contract(
            "mention_rate must lie in [0, 1] and system_rate in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let systems = ((config.utterances as f64 * config.system_rate).round() as usize)
        .min(config.utterances - config.threads);
    let spoken = config.utterances - systems;

    let mut taken = Vec::new();
    let mut topics: Vec<&'static [&'static str]> = TOPICS.to_vec();
    topics.shuffle(&mut rng);
    let mut lengths = vec![1usize; config.threads];
    for _ in config.threads..spoken {
        lengths[rng.gen_range(0..config.threads)] += 1;
    }
    let mut pending: Vec<Thread> = lengths
        .iter()
        .enumerate()
        .map(|(k, &len)| Thread {
            topic: topics[k % topics.len()],
            nicks: [make_nick(&mut rng, &mut taken), make_nick(&mut rng, &mut taken)],
            remaining: len,
            emitted: 0,
            last: 0,
        })
        .collect();
    pending.reverse();

    let mut is_system_slot = vec![false; config.utterances];
    for k in rand::seq::index::sample(&mut rng, config.utterances, systems) {
        is_system_slot[k] = true;
    }

    let mut minutes: u32 = rng.gen_range(0..24 * 60);
    let mut active: Vec<Thread> = Vec::new();
    let mut utterances = Vec::with_capacity(config.utterances);
    let mut links = Vec::with_capacity(config.utterances);
    for (i, &sys) in is_system_slot.iter().enumerate() {
        if i > 0 {
            minutes = (minutes + 1) % (24 * 60);
        }
        let time = Timestamp::new((minutes / 60) as u8, (minutes % 60) as u8)?;
        if sys {
            let nick = if rng.gen_bool(0.5) && !taken.is_empty() {
                taken.choose(&mut rng).expect("nicks").clone()
            } else {
                make_nick(&mut rng, &mut taken)
            };
            let verb = if rng.gen_bool(0.5) { "has joined #ubuntu" } else { "has quit [Quit: Leaving]" };
            utterances.push(Utterance::new(i, time, SYSTEM, &format!("{nick} {verb}"), true));
            links.push(LinkAnnotation::new(i, i));
            continue;
        }
        let start_new = !pending.is_empty()
            && (active.is_empty() || (active.len() < config.max_active.max(1) && rng.gen_bool(0.35)));
        let slot = if start_new {
            active.push(pending.pop().expect("pending thread"));
            active.len() - 1
        } else {
            rng.gen_range(0..active.len())
        };
        let th = &mut active[slot];
        let speaker = th.nicks[th.emitted % 2].clone();
        let (text, parent) = if th.emitted == 0 {
            (sentence(&mut rng, th.topic, true), i)
        } else {
            let body = sentence(&mut rng, th.topic, false);
            let addressee = &th.nicks[(th.emitted + 1) % 2];
            if rng.gen_bool(config.mention_rate) {
                (format!("{addressee}: {body}"), th.last)
            } else {
                (body, th.last)
            }
        };
        th.emitted += 1;
        th.remaining -= 1;
        th.last = i;
        if th.remaining == 0 {
            active.swap_remove(slot);
        }
        utterances.push(Utterance::new(i, time, &speaker, &text, false));
        links.push(LinkAnnotation::new(i, parent));
    }
    ChatFile::new(name, utterances, links)
}

/// `count` files named `{prefix}-{k}`, file `k` seeded with `seed + k`.
pub fn gen_synth_corpus(config: &SynthConfig, prefix: &str, count: usize) -> Result<Vec<ChatFile>> {
    (0..count)
        .map(|k| {
            let c = SynthConfig {
                seed: config.seed.wrapping_add(k as u64),
                ..config.clone()
            };
            gen_synth(&c, &format!("{prefix}-{k}"))
        })
        .collect()
}
