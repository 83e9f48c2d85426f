//! Finite-difference and reference-implementation checks of the backward
//! passes.

mod common;

use aalstm::cell::{aa_lstm_step, classic_lstm_step, CellParams, CellState};
use aalstm::data::Task;
use aalstm::cell::CellKind;
use aalstm::experiment::{run_gradcheck, GradCheckSetup};
use aalstm::head::{atae_attention_backward, atae_attention_head, AttentionParams, HeadKind};
use aalstm::params::Parameters;
use aalstm::tensor::Vector;
use aalstm::train::grad_check;
use common::*;
use proptest::prelude::*;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn numeric(mut f: impl FnMut(&Vector) -> f64, at: &Vector) -> Vector {
    let mut v = at.clone();
    let mut out = Vector::zeros(at.dim());
    for k in 0..at.dim() {
        let orig = v[k];
        v[k] = orig + EPS;
        let plus = f(&v);
        v[k] = orig - EPS;
        let minus = f(&v);
        v[k] = orig;
        out[k] = (plus - minus) / (2.0 * EPS);
    }
    out
}

fn assert_close(analytic: &Vector, numeric: &Vector, what: &str) {
    for k in 0..analytic.dim() {
        let (a, n) = (analytic[k], numeric[k]);
        let scale = a.abs().max(n.abs());
        if scale > 1e-8 {
            assert!((a - n).abs() / scale < TOL, "{what}[{k}]: analytic {a}, numeric {n}");
        }
    }
}

/// Loss `sum_t <w_t, h_t>` and its upstream gradients.
fn weighted_hidden_loss(hs: &[Vector], ws: &[Vector]) -> f64 {
    hs.iter().zip(ws).map(|(h, w)| h.dot(w).unwrap()).sum()
}

fn cell_case(kind: CellKind, dx: usize, dc: usize, t: usize, seed: u64, last_only: bool) {
    let mut rng = rng(seed);
    let mut cell = CellParams::init(kind, dx, dc, -0.5, 0.5, &mut rng).unwrap();
    // Nonzero biases.
    for p in cell.tensors_mut() {
        if p.name.contains(".b_") {
            for v in p.data.iter_mut() {
                *v = rand::Rng::gen_range(&mut rng, -0.5..0.5);
            }
        }
    }
    let xs: Vec<Vector> = (0..t).map(|_| rand_vec(&mut rng, dx, 1.0)).collect();
    let aspect = (kind == CellKind::AspectAware).then(|| rand_vec(&mut rng, dc, 1.0));
    let init = rand_state(&mut rng, dc, 0.5);
    let ws: Vec<Vector> = (0..t)
        .map(|i| {
            if last_only {
                if i + 1 == t {
                    Vector::filled(dc, 1.0)
                } else {
                    Vector::zeros(dc)
                }
            } else {
                rand_vec(&mut rng, dc, 1.0)
            }
        })
        .collect();

    let run = |cell: &CellParams, xs: &[Vector], aspect: Option<&Vector>, init: &CellState| {
        let out = cell.unroll(xs, aspect, Some(init)).unwrap();
        weighted_hidden_loss(&out.hs, &ws)
    };

    let out = cell.unroll(&xs, aspect.as_ref(), Some(&init)).unwrap();
    let grads = cell.backward(&out.caches, &ws).unwrap();

    let report = grad_check(&mut cell, &grads.params, EPS, |c| Ok(run(c, &xs, aspect.as_ref(), &init))).unwrap();
    assert!(report.passes(TOL), "{kind:?} params: {report}");

    for (i, dx_i) in grads.dxs.iter().enumerate() {
        let n = numeric(
            |v| {
                let mut xs2 = xs.clone();
                xs2[i] = v.clone();
                run(&cell, &xs2, aspect.as_ref(), &init)
            },
            &xs[i],
        );
        assert_close(dx_i, &n, &format!("dx_{i}"));
    }
    if let Some(a) = &aspect {
        let n = numeric(|v| run(&cell, &xs, Some(v), &init), a);
        assert_close(grads.d_aspect.as_ref().expect("aspect gradient"), &n, "dA");
    } else {
        assert!(grads.d_aspect.is_none());
    }
    let n_h = numeric(
        |v| run(&cell, &xs, aspect.as_ref(), &CellState { h: v.clone(), c: init.c.clone() }),
        &init.h,
    );
    assert_close(&grads.d_init.h, &n_h, "dh0");
    let n_c = numeric(
        |v| run(&cell, &xs, aspect.as_ref(), &CellState { h: init.h.clone(), c: v.clone() }),
        &init.c,
    );
    assert_close(&grads.d_init.c, &n_c, "dc0");
}

#[test]
fn cell_sum_of_last_hidden_state() {
    for seed in 0..5 {
        cell_case(CellKind::AspectAware, 3, 3, 4, seed, true);
        cell_case(CellKind::Classic, 3, 3, 4, seed, true);
    }
}

#[test]
fn cell_loss_over_every_step() {
    for seed in 0..5 {
        cell_case(CellKind::AspectAware, 4, 6, 5, 100 + seed, false);
        cell_case(CellKind::Classic, 4, 6, 5, 100 + seed, false);
    }
}

#[test]
fn attention_head_gradients() {
    for seed in 0..5 {
        let mut rng = rng(200 + seed);
        let (dc, t) = (5, 4);
        let mut p = AttentionParams::init(dc, dc, dc, -0.7, 0.7, &mut rng).unwrap();
        let hs: Vec<Vector> = (0..t).map(|_| rand_vec(&mut rng, dc, 0.9)).collect();
        let aspect = rand_vec(&mut rng, dc, 1.0);
        let w = rand_vec(&mut rng, dc, 1.0);
        let loss = |p: &AttentionParams, hs: &[Vector], a: &Vector| {
            atae_attention_head(hs, a, p).unwrap().0.dot(&w).unwrap()
        };
        let (_, weights, cache) = atae_attention_head(&hs, &aspect, &p).unwrap();
        assert!((weights.sum() - 1.0).abs() < 1e-12);
        let g = atae_attention_backward(&p, &cache, &w).unwrap();

        let report = grad_check(&mut p, &g.params, EPS, |q| Ok(loss(q, &hs, &aspect))).unwrap();
        assert!(report.passes(TOL), "{report}");
        let n = numeric(|v| loss(&p, &hs, v), &aspect);
        assert_close(&g.d_aspect, &n, "dA");
        for i in 0..t {
            let n = numeric(
                |v| {
                    let mut hs2 = hs.clone();
                    hs2[i] = v.clone();
                    loss(&p, &hs2, &aspect)
                },
                &hs[i],
            );
            assert_close(&g.dhs[i], &n, &format!("dh_{i}"));
        }
    }
}

/// Attention weights against a direct evaluation of
/// `w . tanh([W_h h_t ; W_v A])` followed by a softmax.
#[test]
fn attention_weights_match_reference() {
    let mut rng = rng(7);
    let dc = 4;
    let p = AttentionParams::init(dc, dc, dc, -1.0, 1.0, &mut rng).unwrap();
    let hs: Vec<Vector> = (0..6).map(|_| rand_vec(&mut rng, dc, 1.0)).collect();
    let aspect = rand_vec(&mut rng, dc, 1.0);
    let (_, weights, _) = atae_attention_head(&hs, &aspect, &p).unwrap();
    let scores: Vec<f64> = hs
        .iter()
        .map(|h| {
            let mut s = 0.0;
            for j in 0..dc {
                let zh: f64 = (0..dc).map(|k| p.w_h.get(j, k) * h[k]).sum();
                let za: f64 = (0..dc).map(|k| p.w_v.get(j, k) * aspect[k]).sum();
                s += p.w[j] * zh.tanh() + p.w[dc + j] * za.tanh();
            }
            s
        })
        .collect();
    let m = scores.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    for (t, s) in scores.iter().enumerate() {
        assert!((weights[t] - (s - m).exp() / z).abs() < 1e-12);
    }
}

#[test]
fn term_task_pipelines_pass_gradient_check() {
    for cell in [CellKind::Classic, CellKind::AspectAware] {
        for head in [HeadKind::Last, HeadKind::Attention] {
            for seed in 0..3 {
                let mut s = GradCheckSetup::new(Task::Atsa, cell, head, seed);
                s.embedding_dim = 6;
                let report = run_gradcheck(&s, |_| {}).unwrap();
                assert!(report.passes(TOL), "{cell:?} {head:?} seed {seed}: {report}");
                assert!(report.checked > 100);
            }
        }
    }
}

#[test]
fn steps_match_reference_implementation() {
    let mut rng = rng(11);
    for _ in 0..50 {
        let (dx, dc) = (3, 5);
        let p = rand_aa_params(&mut rng, dx, dc, 1.0);
        let x = rand_vec(&mut rng, dx, 1.0);
        let a = rand_vec(&mut rng, dc, 1.0);
        let prev = rand_state(&mut rng, dc, 1.0);

        let (s, _) = aa_lstm_step(&p, &x, &a, &prev).unwrap();
        let (h, c, _, _) = scalar_step(
            &p.core,
            Some(&p.aspect),
            x.as_slice(),
            Some(a.as_slice()),
            prev.h.as_slice(),
            prev.c.as_slice(),
        );
        assert!(max_abs_diff(s.h.as_slice(), &h) <= 1e-12);
        assert!(max_abs_diff(s.c.as_slice(), &c) <= 1e-12);

        let (s, _) = classic_lstm_step(&p.core, &x, &prev).unwrap();
        let (h, c, _, _) = scalar_step(&p.core, None, x.as_slice(), None, prev.h.as_slice(), prev.c.as_slice());
        assert!(max_abs_diff(s.h.as_slice(), &h) <= 1e-12);
        assert!(max_abs_diff(s.c.as_slice(), &c) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_pipelines_pass_gradient_check(
        seed in any::<u64>(),
        dc in 2usize..7,
        dx in 2usize..7,
        seq in 1usize..7,
        aa in any::<bool>(),
        attention in any::<bool>(),
    ) {
        let cell = if aa { CellKind::AspectAware } else { CellKind::Classic };
        let head = if attention { HeadKind::Attention } else { HeadKind::Last };
        let mut s = GradCheckSetup::new(Task::Acsa, cell, head, seed);
        s.hidden_dim = dc;
        s.embedding_dim = dx;
        s.seq_len = seq;
        let report = run_gradcheck(&s, |_| {}).unwrap();
        prop_assert!(report.passes(TOL), "{}", report);
    }
}
