//! Link and cluster scores for a hand-made prediction against gold.

use disentangle::decoder::build_threads;
use disentangle::metrics::{ari, exact_match, link_prf, scaled_vi, self_link_prf};
use disentangle::LinkAnnotation;

fn links(parents: &[usize]) -> Vec<LinkAnnotation> {
    parents.iter().enumerate().map(|(c, &p)| LinkAnnotation::new(c, p)).collect()
}

fn main() -> disentangle::Result<()> {
    // Two interleaved threads {0,2,4,6} and {1,3,5} plus a lone notice at 7.
    let gold = links(&[0, 1, 0, 1, 2, 3, 4, 7]);
    // 5 is attached to the wrong thread and 6 starts a thread of its own.
    let pred = links(&[0, 1, 0, 1, 2, 4, 6, 7]);

    let (g, p) = (build_threads(&gold, 8)?, build_threads(&pred, 8)?);
    println!("gold threads      {:?}", g.blocks());
    println!("predicted threads {:?}", p.blocks());
    println!("scaled VI   {:.4}", scaled_vi(&p, &g)?);
    println!("ARI         {:.4}", ari(&p, &g)?);
    let em = exact_match(&p, &g);
    println!("exact match P {:.3} R {:.3} F1 {:.3}", em.precision, em.recall, em.f1);
    let l = link_prf(&pred, &gold);
    println!("link        P {:.3} R {:.3} F1 {:.3}", l.precision, l.recall, l.f1);
    let s = self_link_prf(&pred, &gold);
    println!("self-link   P {:.3} R {:.3} F1 {:.3}", s.precision, s.recall, s.f1);
    Ok(())
}
