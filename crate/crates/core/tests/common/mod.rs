//! Helpers shared by the integration suites: random cell instances and a
//! plain scalar-loop reference implementation of one recurrent step.

#![allow(dead_code)]

use aalstm::cell::{AaLstmParams, AspectGateParams, CellState, LstmParams};
use aalstm::tensor::{Matrix, Vector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector::from_vec((0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

pub fn rand_mat<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Random aspect-aware parameters with nonzero biases.
pub fn rand_aa_params<R: Rng>(rng: &mut R, dx: usize, dc: usize, scale: f64) -> AaLstmParams {
    let core = LstmParams {
        w_i: rand_mat(rng, dc, dx + dc, scale),
        w_f: rand_mat(rng, dc, dx + dc, scale),
        w_c: rand_mat(rng, dc, dx + dc, scale),
        w_o: rand_mat(rng, dc, dx + dc, scale),
        b_i: rand_vec(rng, dc, scale),
        b_f: rand_vec(rng, dc, scale),
        b_c: rand_vec(rng, dc, scale),
        b_o: rand_vec(rng, dc, scale),
    };
    let aspect = AspectGateParams {
        w_ai: rand_mat(rng, dc, 2 * dc, scale),
        w_af: rand_mat(rng, dc, 2 * dc, scale),
        w_ao: rand_mat(rng, dc, 2 * dc, scale),
        b_ai: rand_vec(rng, dc, scale),
        b_af: rand_vec(rng, dc, scale),
        b_ao: rand_vec(rng, dc, scale),
    };
    AaLstmParams::new(core, aspect).unwrap()
}

pub fn rand_state<R: Rng>(rng: &mut R, dc: usize, scale: f64) -> CellState {
    CellState {
        h: rand_vec(rng, dc, scale.min(1.0)),
        c: rand_vec(rng, dc, scale),
    }
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `sum_k W[j][k] * v[k]` for one row, with `v` the concatenation of `a`
/// and `b`.
fn row_dot(w: &Matrix, j: usize, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (k, &v) in a.iter().chain(b).enumerate() {
        s += w.get(j, k) * v;
    }
    s
}

/// Reference step written unit by unit. `aspect = None` is the classic
/// cell. Returns `(h, c, [i, f, o], [a_i, a_f, a_o])`.
pub fn scalar_step(
    core: &LstmParams,
    gates: Option<&AspectGateParams>,
    x: &[f64],
    aspect: Option<&[f64]>,
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, [Vec<f64>; 3], [Vec<f64>; 3]) {
    let dc = h_prev.len();
    let mut h = vec![0.0; dc];
    let mut c = vec![0.0; dc];
    let mut gi = vec![0.0; dc];
    let mut gf = vec![0.0; dc];
    let mut go = vec![0.0; dc];
    let mut ai = vec![0.0; dc];
    let mut af = vec![0.0; dc];
    let mut ao = vec![0.0; dc];
    for j in 0..dc {
        let (inj_i, inj_f, inj_o) = match (gates, aspect) {
            (Some(g), Some(a)) => {
                ai[j] = sig(row_dot(&g.w_ai, j, a, h_prev) + g.b_ai[j]);
                af[j] = sig(row_dot(&g.w_af, j, a, h_prev) + g.b_af[j]);
                ao[j] = sig(row_dot(&g.w_ao, j, a, h_prev) + g.b_ao[j]);
                (ai[j] * a[j], af[j] * a[j], ao[j] * a[j])
            }
            _ => (0.0, 0.0, 0.0),
        };
        gi[j] = sig(row_dot(&core.w_i, j, x, h_prev) + inj_i + core.b_i[j]);
        gf[j] = sig(row_dot(&core.w_f, j, x, h_prev) + inj_f + core.b_f[j]);
        let cand = (row_dot(&core.w_c, j, x, h_prev) + core.b_c[j]).tanh();
        c[j] = gf[j] * c_prev[j] + gi[j] * cand;
        go[j] = sig(row_dot(&core.w_o, j, x, h_prev) + inj_o + core.b_o[j]);
        h[j] = go[j] * c[j].tanh();
    }
    (h, c, [gi, gf, go], [ai, af, ao])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
