use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::Rng;

fn sigmoid(x: f64) -> f64 {
    crate::eval::sigmoid(x)
}

/// LSTM cell with gates stacked `[i, f, g, o]`; `w` is `4H x (input + H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Inverted-dropout masks for one sequence: a fresh input mask per step and one
/// recurrent mask shared by every step.
#[derive(Debug, Clone, Default)]
pub struct Masks {
    pub input: Option<Vec<Array1<f64>>>,
    pub recurrent: Option<Array1<f64>>,
}

fn mask(rng: &mut Rng, rate: f64, n: usize) -> Array1<f64> {
    let keep = 1.0 - rate;
    Array1::from_shape_fn(n, |_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
}

impl Masks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn sample(rng: &mut Rng, rate: f64, steps: usize, input: usize, hidden: usize) -> Self {
        if rate <= 0.0 {
            return Self::none();
        }
        Masks {
            input: Some((0..steps).map(|_| mask(rng, rate, input)).collect()),
            recurrent: Some(mask(rng, rate, hidden)),
        }
    }
}

#[derive(Debug, Clone)]
struct Step {
    xh: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    c_prev: Array1<f64>,
    tanh_c: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<Step>,
    masks: Masks,
}

impl Lstm {
    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1.
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let s = 1.0 / (hidden as f64).sqrt();
        let w = Array2::from_shape_fn((4 * hidden, input + hidden), |_| (2.0 * rng.uniform() - 1.0) * s);
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Lstm { w, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            w: Array2::zeros((4 * hidden, input + hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.ncols() - self.hidden()
    }

    /// Run from zero state; returns the hidden state at every step.
    pub fn forward(&self, xs: &[Array1<f64>], masks: &Masks) -> (Vec<Array1<f64>>, LstmTrace) {
        let hd = self.hidden();
        let mut h = Array1::zeros(hd);
        let mut c = Array1::zeros(hd);
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            let x_in = match &masks.input {
                Some(m) => x * &m[t],
                None => x.clone(),
            };
            let h_in = match &masks.recurrent {
                Some(m) => &h * m,
                None => h.clone(),
            };
            let xh = concatenate![Axis(0), x_in, h_in];
            let z = self.w.dot(&xh) + &self.b;
            let i = z.slice(s![..hd]).mapv(sigmoid);
            let f = z.slice(s![hd..2 * hd]).mapv(sigmoid);
            let g = z.slice(s![2 * hd..3 * hd]).mapv(f64::tanh);
            let o = z.slice(s![3 * hd..]).mapv(sigmoid);
            let c_new = &f * &c + &i * &g;
            let tanh_c = c_new.mapv(f64::tanh);
            h = &o * &tanh_c;
            hs.push(h.clone());
            steps.push(Step { xh, i, f, g, o, c_prev: c, tanh_c });
            c = c_new;
        }
        (hs, LstmTrace { steps, masks: masks.clone() })
    }

    /// Accumulates parameter gradients into `grad` and returns input gradients.
    /// State gradients are cut every `tbptt` steps.
    pub fn backward(&self, trace: &LstmTrace, dhs: &[Array1<f64>], tbptt: usize, grad: &mut Lstm) -> Vec<Array1<f64>> {
        let hd = self.hidden();
        let input = self.input();
        let n = trace.steps.len();
        let mut dxs = vec![Array1::zeros(input); n];
        let mut dh_next = Array1::<f64>::zeros(hd);
        let mut dc_next = Array1::<f64>::zeros(hd);
        let mut dz = Array1::<f64>::zeros(4 * hd);
        for t in (0..n).rev() {
            let st = &trace.steps[t];
            let dh = &dhs[t] + &dh_next;
            let d_o = &dh * &st.tanh_c;
            let dc = &dc_next + &(&dh * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v));
            let di = &dc * &st.g;
            let dg = &dc * &st.i;
            let df = &dc * &st.c_prev;
            dz.slice_mut(s![..hd]).assign(&(&di * &st.i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![hd..2 * hd]).assign(&(&df * &st.f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![2 * hd..3 * hd]).assign(&(&dg * &st.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![3 * hd..]).assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));

            let dz_col = dz.view().insert_axis(Axis(1));
            let xh_row = st.xh.view().insert_axis(Axis(0));
            general_mat_mul(1.0, &dz_col, &xh_row, 1.0, &mut grad.w);
            grad.b += &dz;

            let dxh = self.w.t().dot(&dz);
            let mut dx = dxh.slice(s![..input]).to_owned();
            let mut dh_prev = dxh.slice(s![input..]).to_owned();
            if let Some(m) = &trace.masks.input {
                dx *= &m[t];
            }
            if let Some(m) = &trace.masks.recurrent {
                dh_prev *= m;
            }
            dxs[t] = dx;
            if tbptt > 0 && t % tbptt == 0 {
                dh_next.fill(0.0);
                dc_next.fill(0.0);
            } else {
                dh_next = dh_prev;
                dc_next = &dc * &st.f;
            }
        }
        dxs
    }
}

/// Forward and backward LSTMs over the same sequence, outputs concatenated `[fwd, bwd]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
}

impl BiLstm {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiLstm {
            fwd: Lstm::new(input, hidden, rng),
            bwd: Lstm::new(input, hidden, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: Lstm::zeros(input, hidden),
            bwd: Lstm::zeros(input, hidden),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden()
    }

    pub fn forward(&self, xs: &[Array1<f64>], masks: [&Masks; 2]) -> (Vec<Array1<f64>>, BiTrace) {
        let (hf, tf) = self.fwd.forward(xs, masks[0]);
        let rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
        let (mut hb, tb) = self.bwd.forward(&rev, masks[1]);
        hb.reverse();
        let out = hf
            .iter()
            .zip(&hb)
            .map(|(a, b)| concatenate![Axis(0), a.view(), b.view()])
            .collect();
        (out, BiTrace { fwd: tf, bwd: tb })
    }

    pub fn backward(&self, trace: &BiTrace, douts: &[Array1<f64>], tbptt: usize, grad: &mut BiLstm) -> Vec<Array1<f64>> {
        let h = self.fwd.hidden();
        let dhf: Vec<Array1<f64>> = douts.iter().map(|d| d.slice(s![..h]).to_owned()).collect();
        let dhb: Vec<Array1<f64>> = douts.iter().rev().map(|d| d.slice(s![h..]).to_owned()).collect();
        let dxf = self.fwd.backward(&trace.fwd, &dhf, tbptt, &mut grad.fwd);
        let dxb = self.bwd.backward(&trace.bwd, &dhb, tbptt, &mut grad.bwd);
        dxf.into_iter().zip(dxb.into_iter().rev()).map(|(a, b)| a + b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rng: &mut Rng, n: usize, d: usize) -> Vec<Array1<f64>> {
        (0..n).map(|_| Array1::from_shape_fn(d, |_| rng.normal())).collect()
    }

    fn loss(outs: &[Array1<f64>], proj: &[Array1<f64>]) -> f64 {
        outs.iter().zip(proj).map(|(o, p)| o.dot(p)).sum()
    }

    fn check_lstm(masks: Masks) {
        let mut rng = Rng::new(5);
        let cell = Lstm::new(3, 4, &mut rng);
        let xs = seq(&mut rng, 5, 3);
        let proj = seq(&mut rng, 5, 4);
        let (_, trace) = cell.forward(&xs, &masks);
        let mut grad = Lstm::zeros(3, 4);
        let dxs = cell.backward(&trace, &proj, 0, &mut grad);
        let h = 1e-5;
        let f = |c: &Lstm, xs: &[Array1<f64>]| loss(&c.forward(xs, &masks).0, &proj);
        let close = |fd: f64, g: f64| (fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()) || (fd - g).abs() < 1e-9;
        for idx in 0..cell.w.len() {
            let (r, c) = (idx / cell.w.ncols(), idx % cell.w.ncols());
            let (mut p, mut m) = (cell.clone(), cell.clone());
            p.w[[r, c]] += h;
            m.w[[r, c]] -= h;
            let fd = (f(&p, &xs) - f(&m, &xs)) / (2.0 * h);
            assert!(close(fd, grad.w[[r, c]]), "w[{r},{c}]: {fd} vs {}", grad.w[[r, c]]);
        }
        for k in 0..cell.b.len() {
            let (mut p, mut m) = (cell.clone(), cell.clone());
            p.b[k] += h;
            m.b[k] -= h;
            assert!(close((f(&p, &xs) - f(&m, &xs)) / (2.0 * h), grad.b[k]));
        }
        for t in 0..xs.len() {
            for d in 0..3 {
                let (mut p, mut m) = (xs.clone(), xs.clone());
                p[t][d] += h;
                m[t][d] -= h;
                assert!(close((f(&cell, &p) - f(&cell, &m)) / (2.0 * h), dxs[t][d]));
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_lstm(Masks::none());
    }

    #[test]
    fn gradients_match_with_fixed_dropout_masks() {
        let mut rng = Rng::new(9);
        check_lstm(Masks::sample(&mut rng, 0.3, 5, 3, 4));
    }

    #[test]
    fn truncation_blocks_gradient_to_early_steps() {
        let mut rng = Rng::new(6);
        let cell = Lstm::new(2, 3, &mut rng);
        let xs = seq(&mut rng, 6, 2);
        let (_, trace) = cell.forward(&xs, &Masks::none());
        // loss only on the last step
        let mut dhs = vec![Array1::zeros(3); 6];
        dhs[5] = Array1::ones(3);
        let dxs = cell.backward(&trace, &dhs, 3, &mut Lstm::zeros(2, 3));
        assert!(dxs[..3].iter().all(|d| d.iter().all(|&v| v == 0.0)));
        assert!(dxs[3].iter().any(|&v| v != 0.0));
        let full = cell.backward(&trace, &dhs, 0, &mut Lstm::zeros(2, 3));
        assert!(full[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn reversed_input_swaps_directions() {
        let mut rng = Rng::new(7);
        let cell = Lstm::new(3, 4, &mut rng);
        let bi = BiLstm { fwd: cell.clone(), bwd: cell };
        let xs = seq(&mut rng, 6, 3);
        let none = Masks::none();
        let (out, _) = bi.forward(&xs, [&none, &none]);
        let rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
        let (out_rev, _) = bi.forward(&rev, [&none, &none]);
        for (t, o) in out.iter().enumerate() {
            let r = &out_rev[xs.len() - 1 - t];
            assert_eq!(o.slice(s![..4]), r.slice(s![4..]));
            assert_eq!(o.slice(s![4..]), r.slice(s![..4]));
        }
    }

    #[test]
    fn single_step_sees_only_its_input() {
        let mut rng = Rng::new(8);
        let bi = BiLstm::new(3, 2, &mut rng);
        let x = seq(&mut rng, 1, 3);
        let none = Masks::none();
        let (a, _) = bi.forward(&x, [&none, &none]);
        let (b, _) = bi.forward(&x, [&none, &none]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].len(), 4);
    }
}
