//! Finite-difference sweeps shared by the gradient tests and the acceptance run.
//! Each returns one named result per check so callers can assert or summarise.

use disentangle::nn::{check_gradients, check_param_gradients, GradCheck, NodeId, ParameterStore, Tape, Tensor};
use disentangle::trainer::{batch_gradients, pair_map, prepare_training_file};
use rand::Rng;

use super::{random_file, rng, scale_params, tensor, tiny_model};

pub const EPS: f64 = 1e-6;
/// Long computations accumulate rounding noise that swamps a smaller step.
pub const EPS_DEEP: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

pub type Named = (String, GradCheck);

/// `Σ out ⊙ W` for a fixed random `W`, so every output entry matters.
pub fn weighted(t: &mut Tape, out: NodeId, seed: u64) -> NodeId {
    let [r, c] = t.shape(out);
    let w = t.constant(tensor(r, c, 1.0, &mut rng(seed)));
    let m = t.mul(out, w);
    t.sum(m)
}

fn op(name: String, inputs: &[Tensor], f: impl Fn(&mut Tape, &[NodeId]) -> NodeId) -> Named {
    let r = check_gradients(inputs, EPS, |t, ids| {
        let out = f(t, ids);
        weighted(t, out, 99)
    })
    .unwrap();
    (name, r)
}

pub fn elementwise_and_matrix_ops(seed: u64, rounds: usize) -> Vec<Named> {
    let mut g = rng(seed);
    let mut out = Vec::new();
    for round in 0..rounds {
        let (r, c, k) = (g.gen_range(1..5), g.gen_range(1..6), g.gen_range(1..5));
        let a = tensor(r, c, 1.0, &mut g);
        let b = tensor(r, c, 1.0, &mut g);
        let row = tensor(1, c, 1.0, &mut g);
        let m = tensor(c, k, 1.0, &mut g);
        let mt = tensor(k, c, 1.0, &mut g);
        let at = tensor(c, r, 1.0, &mut g);
        let tag = |s: &str| format!("{s} (round {round}, {r}x{c})");
        out.push(op(tag("matmul"), &[a.clone(), m.clone()], |t, x| t.matmul(x[0], x[1])));
        out.push(op(tag("matmul a·bᵀ"), &[a.clone(), mt.clone()], |t, x| t.matmul_t(x[0], false, x[1], true)));
        out.push(op(tag("matmul aᵀ·b"), &[at.clone(), m.clone()], |t, x| t.matmul_t(x[0], true, x[1], false)));
        out.push(op(tag("matmul aᵀ·bᵀ"), &[at.clone(), mt.clone()], |t, x| t.matmul_t(x[0], true, x[1], true)));
        out.push(op(tag("add"), &[a.clone(), b.clone()], |t, x| t.add(x[0], x[1])));
        out.push(op(tag("add broadcast"), &[a.clone(), row.clone()], |t, x| t.add(x[0], x[1])));
        out.push(op(tag("sub"), &[a.clone(), b.clone()], |t, x| t.sub(x[0], x[1])));
        out.push(op(tag("sub broadcast"), &[a.clone(), row.clone()], |t, x| t.sub(x[0], x[1])));
        out.push(op(tag("mul"), &[a.clone(), b.clone()], |t, x| t.mul(x[0], x[1])));
        out.push(op(tag("scale"), &[a.clone()], |t, x| t.scale(x[0], -1.7)));
        out.push(op(tag("tanh"), &[a.clone()], |t, x| t.tanh(x[0])));
        out.push(op(tag("sigmoid"), &[a.clone()], |t, x| t.sigmoid(x[0])));
        out.push(op(tag("softmax rows"), &[a.clone()], |t, x| t.softmax_rows(x[0])));
        out.push(op(tag("log softmax rows"), &[a.clone()], |t, x| t.log_softmax_rows(x[0])));
        out.push(op(tag("concat cols"), &[a.clone(), at.clone()], |t, x| {
            let tr = t.transpose(x[1]);
            t.concat_cols(&[x[0], tr, x[0]])
        }));
        out.push(op(tag("concat rows"), &[a.clone(), row.clone()], |t, x| t.concat_rows(&[x[1], x[0], x[1]])));
        out.push(op(tag("slice cols"), &[a.clone()], |t, x| t.slice_cols(x[0], c / 2, c - c / 2)));
        out.push(op(tag("slice rows"), &[a.clone()], |t, x| t.slice_rows(x[0], r / 2, r - r / 2)));
        out.push(op(tag("gather rows"), &[a.clone(), b.clone()], |t, x| {
            t.gather_rows(&[(x[1], r - 1), (x[0], 0), (x[1], 0), (x[1], r - 1)])
        }));
        out.push(op(tag("mean rows"), &[a.clone()], |t, x| t.mean_rows(x[0])));
        out.push(op(tag("max rows"), &[a.clone()], |t, x| t.max_rows(x[0])));
        out.push(op(tag("transpose"), &[a.clone()], |t, x| t.transpose(x[0])));
        out.push(op(tag("select sum"), &[a.clone()], |t, x| t.select_sum(x[0], &[(0, 0), (r - 1, c - 1), (0, 0)])));
        out.push(op(tag("sum"), &[a.clone()], |t, x| t.sum(x[0])));
    }
    out
}

pub fn binary_cross_entropy(seed: u64) -> Vec<Named> {
    let mut g = rng(seed);
    let mut out = Vec::new();
    for _ in 0..10 {
        let p = Tensor::scalar(g.gen_range(0.05..0.95));
        for label in [0.0, 1.0] {
            let r = check_gradients(&[p.clone()], EPS, |t, x| t.bce(x[0], label)).unwrap();
            out.push((format!("bce label {label}"), r));
        }
    }
    out
}

/// Soft alignment of an `m`-token against an `n`-token sequence, `m` in 1..=7.
pub fn soft_alignment(seed: u64) -> Vec<Named> {
    let mut g = rng(seed);
    (1..=7)
        .map(|m| {
            let n = g.gen_range(1..=7);
            let inputs = [tensor(m, 16, 0.8, &mut g), tensor(n, 16, 0.8, &mut g)];
            op(format!("soft align {m}x{n}"), &inputs, |t, x| t.soft_align(x[0], x[1]))
        })
        .collect()
}

pub fn embedding_lookup(seed: u64) -> Vec<Named> {
    let mut store = ParameterStore::new();
    let table = store.insert("table", tensor(6, 3, 1.0, &mut rng(seed))).unwrap();
    let ids = [1, 4, 1, 0];
    let loss = |p: &ParameterStore, back: bool| {
        let mut t = Tape::new();
        let e = t.embed(p, table, &ids);
        let l = weighted(&mut t, e, seed + 1);
        let mut grads = p.zero_grads();
        if back {
            t.backward(l).accumulate_params(&t, &mut grads);
        }
        (t.value(l).item(), grads)
    };
    let r = check_param_gradients(&store, EPS, 1, |p| Ok(loss(p, true)), |p| Ok(loss(p, false).0)).unwrap();
    vec![("embed".into(), r)]
}

/// Every Bi-LSTM parameter with hidden size 8 over sequences of 1 to 7 tokens and an empty one.
pub fn bilstm(seed: u64) -> Vec<Named> {
    let mut g = rng(seed);
    let file = random_file("f", 12, 5, &mut g);
    let model = tiny_model(&[file], 8, 5, 5, seed + 1);
    let vocab = model.params.get(model.lstm.embedding).rows();
    let seqs: Vec<Vec<usize>> = (1..=7)
        .map(|len| (0..len).map(|_| g.gen_range(0..vocab)).collect())
        .chain([Vec::new()])
        .collect();
    let loss = |p: &ParameterStore, back: bool| {
        let mut t = Tape::new();
        let outs = model.lstm.encode(&mut t, p, &seqs);
        let terms: Vec<NodeId> = outs
            .iter()
            .enumerate()
            .map(|(k, &o)| weighted(&mut t, o, 10 + k as u64))
            .collect();
        let stacked = t.concat_rows(&terms);
        let l = t.sum(stacked);
        let mut grads = p.zero_grads();
        if back {
            t.backward(l).accumulate_params(&t, &mut grads);
        }
        (t.value(l).item(), grads)
    };
    let r = check_param_gradients(&model.params, EPS_DEEP, 1, |p| Ok(loss(p, true)), |p| Ok(loss(p, false).0)).unwrap();
    vec![("bilstm hidden 8".into(), r)]
}

/// The full link and pair objective with dropout, through the encoder, on every parameter.
pub fn joint_loss() -> Vec<Named> {
    [(7, 1.0, 0.0), (8, 0.5, 0.2), (9, 0.0, 0.2)]
        .into_iter()
        .map(|(seed, lambda, dropout)| {
            let mut g = rng(seed);
            let file = random_file("f", 9, 4, &mut g);
            let mut model = tiny_model(std::slice::from_ref(&file), 8, 4, 4, seed);
            scale_params(&mut model, 3.0);
            let prepared = prepare_training_file(&model, &file).unwrap();
            let pairs = pair_map(&prepared, 4, 1.0, &mut g).unwrap();
            let eval = |p: &ParameterStore| {
                let mut m = model.clone();
                m.params = p.clone();
                let mut masks = rng(1000 + seed);
                batch_gradients(&m, &prepared, &prepared.targets, &pairs, lambda, dropout, &mut masks).unwrap()
            };
            let r = check_param_gradients(
                &model.params,
                EPS_DEEP,
                1,
                |p| {
                    let out = eval(p);
                    Ok((out.loss, out.grads))
                },
                |p| Ok(eval(p).loss),
            )
            .unwrap();
            (format!("joint loss (lambda {lambda}, dropout {dropout})"), r)
        })
        .collect()
}
