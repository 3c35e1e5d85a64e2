//! Synthetic objectives with exact gradients: a diagonal quadratic with
//! known smoothness constants, multinomial logistic regression on Gaussian
//! blobs, and a two-layer tanh network on teacher-generated targets.

mod noise;

pub use noise::{estimate_kappa_moment, sample_noise, NoiseFamily, NoiseSpec};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::optim::{ParamGroup, ParamKind};
use crate::rng::stream;
use crate::scalar::Scalar;

const KEY_CURVATURE: u64 = 0xC0;
const KEY_TARGET: u64 = 0xC1;
const KEY_INIT: u64 = 0xC2;
const KEY_DATA: u64 = 0xC3;
const KEY_TEACHER: u64 = 0xC4;
/// Stream tag for gradient noise; keyed further by parameter index and step.
pub const KEY_NOISE: u64 = 0xC5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureSpec {
    Constant { value: f64 },
    LogUniform { low: f64, high: f64 },
    Explicit { values: Vec<Vec<f64>> },
}

impl Default for CurvatureSpec {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Zero,
    Gaussian { scale: f64 },
    /// `scale·u vᵀ` with unit Gaussian directions.
    RankOne { scale: f64 },
    Explicit { values: Vec<Vec<f64>> },
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self::Gaussian { scale: 1.0 }
    }
}

/// `f(W) = ½ Σ h_ij (W_ij − W*_ij)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub curvature: CurvatureSpec,
    #[serde(default)]
    pub target: TargetSpec,
    /// Standard deviation of the Gaussian initial iterate (0 starts at zero).
    #[serde(default)]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Softmax cross-entropy of `z = W x + b` on Gaussian class blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSpec {
    pub features: usize,
    pub classes: usize,
    pub samples: usize,
    /// Standard deviation of the class means.
    pub separation: f64,
    pub seed: u64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            features: 10,
            classes: 4,
            samples: 256,
            separation: 2.0,
            seed: 0,
        }
    }
}

/// Mean squared error of `W₂ tanh(W₁ x + b₁) + b₂` against a random teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mlp2Spec {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub samples: usize,
    pub target_noise: f64,
    pub seed: u64,
}

impl Default for Mlp2Spec {
    fn default() -> Self {
        Self {
            inputs: 8,
            hidden: 32,
            outputs: 4,
            samples: 128,
            target_noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    QuadraticDiag(QuadraticSpec),
    Logistic(LogisticSpec),
    Mlp2(Mlp2Spec),
}

impl ProblemSpec {
    pub fn quadratic(rows: usize, cols: usize, curvature: CurvatureSpec, target: TargetSpec, seed: u64) -> Self {
        Self::QuadraticDiag(QuadraticSpec {
            rows,
            cols,
            curvature,
            target,
            init_scale: 0.0,
            seed,
        })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::QuadraticDiag(_) => "quadratic_diag",
            Self::Logistic(_) => "logistic",
            Self::Mlp2(_) => "mlp2",
        }
    }
}

/// Shape of one trainable parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub id: String,
    pub kind: ParamKind,
    pub rows: usize,
    pub cols: usize,
}

/// Exact smoothness constants of the diagonal quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    /// `Σ h_ij`.
    pub linf_exact: f64,
    /// `Σ h_ij`.
    pub l2_upper: f64,
    /// `max h_ij`.
    pub l2_lower: f64,
}

#[derive(Debug, Clone)]
enum Data {
    Quadratic {
        h: Matrix<f64>,
        w_star: Matrix<f64>,
        w0: Matrix<f64>,
    },
    Logistic {
        x: Matrix<f64>,
        labels: Vec<usize>,
        classes: usize,
    },
    Mlp2 {
        x: Matrix<f64>,
        y: Matrix<f64>,
        hidden: usize,
    },
}

/// A materialized problem instance. Data are generated once from the spec
/// seed and never change.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    data: Data,
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn explicit(values: &[Vec<f64>], rows: usize, cols: usize, what: &str) -> Result<Matrix<f64>> {
    let m = Matrix::from_rows(values)?;
    if m.shape() != (rows, cols) {
        return invalid(format!(
            "{what} has shape {:?}, expected ({rows}, {cols})",
            m.shape()
        ));
    }
    Ok(m)
}

fn build_quadratic(s: &QuadraticSpec) -> Result<Data> {
    if s.rows == 0 || s.cols == 0 {
        return Err(Error::InvalidDimensions {
            rows: s.rows,
            cols: s.cols,
        });
    }
    let (r, c) = (s.rows, s.cols);
    let h = match &s.curvature {
        CurvatureSpec::Constant { value } => Matrix::from_fn(r, c, |_, _| *value),
        CurvatureSpec::LogUniform { low, high } => {
            if !(*low > 0.0 && high >= low) {
                return invalid("log_uniform curvature needs 0 < low <= high");
            }
            let mut rng = stream(s.seed, &[KEY_CURVATURE]);
            let (a, b) = (low.ln(), high.ln());
            Matrix::from_fn(r, c, |_, _| (a + (b - a) * rng.random::<f64>()).exp())
        }
        CurvatureSpec::Explicit { values } => explicit(values, r, c, "curvature")?,
    };
    if !h.as_slice().iter().all(|&v| v > 0.0 && v.is_finite()) {
        return invalid("curvature entries must be positive and finite");
    }
    let mut rng = stream(s.seed, &[KEY_TARGET]);
    let w_star = match &s.target {
        TargetSpec::Zero => Matrix::zeros(r, c),
        TargetSpec::Gaussian { scale } => gaussian_matrix(r, c, *scale, &mut rng),
        TargetSpec::RankOne { scale } => {
            let u = gaussian_matrix(r, 1, 1.0, &mut rng).into_vec();
            let v = gaussian_matrix(c, 1, 1.0, &mut rng).into_vec();
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            Matrix::outer(&u, &v).scale(*scale / (nu * nv))
        }
        TargetSpec::Explicit { values } => explicit(values, r, c, "target")?,
    };
    w_star.check_finite("target")?;
    if !(s.init_scale >= 0.0 && s.init_scale.is_finite()) {
        return invalid("init_scale must be >= 0");
    }
    let w0 = gaussian_matrix(r, c, s.init_scale, &mut stream(s.seed, &[KEY_INIT]));
    Ok(Data::Quadratic { h, w_star, w0 })
}

fn build_logistic(s: &LogisticSpec) -> Result<Data> {
    if s.features == 0 || s.classes < 2 || s.samples == 0 {
        return invalid("logistic needs features >= 1, classes >= 2, samples >= 1");
    }
    let mut rng = stream(s.seed, &[KEY_DATA]);
    let means = gaussian_matrix(s.classes, s.features, s.separation, &mut rng);
    let labels: Vec<usize> = (0..s.samples).map(|i| i % s.classes).collect();
    let x = Matrix::from_fn(s.samples, s.features, |i, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        means[(labels[i], j)] + z
    });
    Ok(Data::Logistic {
        x,
        labels,
        classes: s.classes,
    })
}

fn build_mlp2(s: &Mlp2Spec) -> Result<Data> {
    if s.inputs == 0 || s.hidden == 0 || s.outputs == 0 || s.samples == 0 {
        return invalid("mlp2 dimensions must be >= 1");
    }
    let params = s.hidden * (s.inputs + 1) + s.outputs * (s.hidden + 1);
    if params > 10_000 {
        return invalid(format!("mlp2 has {params} parameters, the limit is 10000"));
    }
    let mut rng = stream(s.seed, &[KEY_DATA]);
    let x = gaussian_matrix(s.samples, s.inputs, 1.0, &mut rng);
    let mut teacher = stream(s.seed, &[KEY_TEACHER]);
    let a1 = gaussian_matrix(s.hidden, s.inputs, 1.0 / (s.inputs as f64).sqrt(), &mut teacher);
    let a2 = gaussian_matrix(s.outputs, s.hidden, 1.0 / (s.hidden as f64).sqrt(), &mut teacher);
    let hidden = x.matmul(&a1.transpose())?.map(f64::tanh);
    let clean = hidden.matmul(&a2.transpose())?;
    let eps = gaussian_matrix(s.samples, s.outputs, s.target_noise, &mut rng);
    let y = clean.add(&eps)?;
    Ok(Data::Mlp2 {
        x,
        y,
        hidden: s.hidden,
    })
}

fn col_sums<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        for (o, &v) in out.as_mut_slice().iter_mut().zip(m.row(i)) {
            *o = *o + v;
        }
    }
    out
}

fn add_row_bias<T: Scalar>(m: &mut Matrix<T>, b: &Matrix<T>) {
    let cols = m.cols();
    for (k, v) in m.as_mut_slice().iter_mut().enumerate() {
        *v = *v + b.as_slice()[k % cols];
    }
}

impl Problem {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let data = match spec {
            ProblemSpec::QuadraticDiag(s) => build_quadratic(s)?,
            ProblemSpec::Logistic(s) => build_logistic(s)?,
            ProblemSpec::Mlp2(s) => build_mlp2(s)?,
        };
        Ok(Self {
            spec: spec.clone(),
            data,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let m = |id: &str, rows, cols| ParamShape {
            id: id.into(),
            kind: ParamKind::Matrix2d,
            rows,
            cols,
        };
        let v = |id: &str, cols| ParamShape {
            id: id.into(),
            kind: ParamKind::Vector1d,
            rows: 1,
            cols,
        };
        match &self.data {
            Data::Quadratic { h, .. } => vec![m("w", h.rows(), h.cols())],
            Data::Logistic { x, classes, .. } => vec![m("w", *classes, x.cols()), v("b", *classes)],
            Data::Mlp2 { x, y, hidden } => vec![
                m("w1", *hidden, x.cols()),
                v("b1", *hidden),
                m("w2", y.cols(), *hidden),
                v("b2", y.cols()),
            ],
        }
    }

    /// Deterministic initial parameters with zero gradients.
    pub fn init_params<T: Scalar>(&self) -> Vec<ParamGroup<T>> {
        let values: Vec<Matrix<f64>> = match &self.data {
            Data::Quadratic { w0, .. } => vec![w0.clone()],
            Data::Logistic { x, classes, .. } => {
                vec![Matrix::zeros(*classes, x.cols()), Matrix::zeros(1, *classes)]
            }
            Data::Mlp2 { x, y, hidden } => {
                let seed = match &self.spec {
                    ProblemSpec::Mlp2(s) => s.seed,
                    _ => 0,
                };
                let mut rng = stream(seed, &[KEY_INIT]);
                let (d, h, o) = (x.cols(), *hidden, y.cols());
                vec![
                    gaussian_matrix(h, d, 1.0 / (d as f64).sqrt(), &mut rng),
                    Matrix::zeros(1, h),
                    gaussian_matrix(o, h, 1.0 / (h as f64).sqrt(), &mut rng),
                    Matrix::zeros(1, o),
                ]
            }
        };
        self.param_shapes()
            .into_iter()
            .zip(values)
            .map(|(s, v)| {
                let value = v.cast::<T>();
                ParamGroup {
                    id: s.id,
                    kind: s.kind,
                    grad: Matrix::zeros(value.rows(), value.cols()),
                    value,
                }
            })
            .collect()
    }

    fn check_params<T: Scalar>(&self, params: &[Matrix<T>]) -> Result<()> {
        let shapes = self.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::LengthMismatch {
                expected: shapes.len(),
                actual: params.len(),
            });
        }
        for (s, p) in shapes.iter().zip(params) {
            if p.shape() != (s.rows, s.cols) {
                return Err(Error::ShapeMismatch {
                    op: "problem params",
                    left: (s.rows, s.cols),
                    right: p.shape(),
                });
            }
        }
        Ok(())
    }

    /// Loss and exact gradient for every parameter.
    pub fn loss_and_grad<T: Scalar>(&self, params: &[Matrix<T>]) -> Result<(T, Vec<Matrix<T>>)> {
        self.check_params(params)?;
        match &self.data {
            Data::Quadratic { h, w_star, .. } => {
                let h = h.cast::<T>();
                let diff = params[0].sub(&w_star.cast::<T>())?;
                let grad = h.hadamard(&diff)?;
                let loss = T::of(0.5) * grad.dot(&diff)?;
                Ok((loss, vec![grad]))
            }
            Data::Logistic { x, labels, .. } => {
                let x = x.cast::<T>();
                let (w, b) = (&params[0], &params[1]);
                let mut z = x.matmul(&w.transpose())?;
                add_row_bias(&mut z, b);
                let n = T::of(x.rows() as f64);
                let mut loss = T::zero();
                // z becomes softmax(z) − onehot(y), scaled by 1/N.
                for (i, &y) in labels.iter().enumerate() {
                    let c = z.cols();
                    let row = &mut z.as_mut_slice()[i * c..(i + 1) * c];
                    let zmax = row.iter().copied().fold(T::neg_infinity(), T::max);
                    let sum: T = row.iter().map(|&v| (v - zmax).exp()).sum();
                    let lse = zmax + sum.ln();
                    loss = loss + lse - row[y];
                    for v in row.iter_mut() {
                        *v = (*v - lse).exp() / n;
                    }
                    row[y] = row[y] - T::one() / n;
                }
                let gw = z.transpose().matmul(&x)?;
                let gb = col_sums(&z);
                Ok((loss / n, vec![gw, gb]))
            }
            Data::Mlp2 { x, y, .. } => {
                let (x, y) = (x.cast::<T>(), y.cast::<T>());
                let (w1, b1, w2, b2) = (&params[0], &params[1], &params[2], &params[3]);
                let mut a = x.matmul(&w1.transpose())?;
                add_row_bias(&mut a, b1);
                let z = a.map(T::tanh);
                let mut out = z.matmul(&w2.transpose())?;
                add_row_bias(&mut out, b2);
                let resid = out.sub(&y)?;
                let count = T::of(resid.len() as f64);
                let loss = resid.dot(&resid)? / count;
                let d_out = resid.scale(T::of(2.0) / count);
                let gw2 = d_out.transpose().matmul(&z)?;
                let gb2 = col_sums(&d_out);
                let dz = d_out.matmul(w2)?;
                let da = dz.zip_map(&z, |g, t| g * (T::one() - t * t))?;
                let gw1 = da.transpose().matmul(&x)?;
                let gb1 = col_sums(&da);
                Ok((loss, vec![gw1, gb1, gw2, gb2]))
            }
        }
    }

    pub fn loss<T: Scalar>(&self, params: &[Matrix<T>]) -> Result<T> {
        Ok(self.loss_and_grad(params)?.0)
    }

    /// Optimal value when known in closed form.
    pub fn f_star(&self) -> Option<f64> {
        match self.data {
            Data::Quadratic { .. } => Some(0.0),
            _ => None,
        }
    }

    pub fn curvature(&self) -> Option<&Matrix<f64>> {
        match &self.data {
            Data::Quadratic { h, .. } => Some(h),
            _ => None,
        }
    }

    pub fn target(&self) -> Option<&Matrix<f64>> {
        match &self.data {
            Data::Quadratic { w_star, .. } => Some(w_star),
            _ => None,
        }
    }

    pub fn analytic_constants(&self) -> Result<AnalyticConstants> {
        let Data::Quadratic { h, .. } = &self.data else {
            return invalid(format!(
                "analytic constants exist only for quadratic_diag, not {}",
                self.spec.family_name()
            ));
        };
        let sum: f64 = h.as_slice().iter().sum();
        let max = h.as_slice().iter().copied().fold(0.0, f64::max);
        Ok(AnalyticConstants {
            linf_exact: sum,
            l2_upper: sum,
            l2_lower: max,
        })
    }

    /// Exact gradients plus independent noise per parameter, drawn from the
    /// stream keyed by `(seed, KEY_NOISE, param index, step)`.
    pub fn stochastic_grad<T: Scalar>(
        &self,
        params: &[Matrix<T>],
        noise: &NoiseSpec,
        seed: u64,
        step: u64,
    ) -> Result<(T, Vec<Matrix<T>>, Vec<Matrix<T>>)> {
        let (loss, exact) = self.loss_and_grad(params)?;
        let mut noisy = Vec::with_capacity(exact.len());
        for (i, g) in exact.iter().enumerate() {
            let mut rng = stream(seed, &[KEY_NOISE, i as u64, step]);
            let e: Matrix<T> = sample_noise(noise, g.rows(), g.cols(), &mut rng)?;
            noisy.push(g.add(&e)?);
        }
        Ok((loss, exact, noisy))
    }
}

/// Convenience wrapper building the problem and evaluating it once.
pub fn loss_and_exact_grad(spec: &ProblemSpec, params: &[Matrix<f64>]) -> Result<(f64, Vec<Matrix<f64>>)> {
    Problem::new(spec)?.loss_and_grad(params)
}

/// Largest `|fd − exact| / max(1, |exact|)` over all coordinates, with
/// central differences of width `2·step_size`.
pub fn fd_gradient_check(problem: &Problem, params: &[Matrix<f64>], step_size: f64) -> Result<f64> {
    if !(step_size > 0.0) {
        return invalid("step_size must be positive");
    }
    let (_, exact) = problem.loss_and_grad(params)?;
    let mut work: Vec<Matrix<f64>> = params.to_vec();
    let mut worst = 0.0f64;
    for (p, g) in exact.iter().enumerate() {
        for k in 0..g.len() {
            let orig = work[p].as_slice()[k];
            work[p].as_mut_slice()[k] = orig + step_size;
            let up = problem.loss(&work)?;
            work[p].as_mut_slice()[k] = orig - step_size;
            let down = problem.loss(&work)?;
            work[p].as_mut_slice()[k] = orig;
            let fd = (up - down) / (2.0 * step_size);
            let e = g.as_slice()[k];
            worst = worst.max((fd - e).abs() / e.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimizer_and_plug_in() {
        let spec = ProblemSpec::quadratic(2, 2, CurvatureSpec::Constant { value: 1.0 }, TargetSpec::Zero, 0);
        let p = Problem::new(&spec).unwrap();
        let (l, g) = p.loss_and_grad(&[Matrix::<f64>::zeros(2, 2)]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g[0].is_zero());
        let (l, g) = p.loss_and_grad(&[Matrix::<f64>::identity(2)]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g[0], Matrix::identity(2));
    }

    #[test]
    fn analytic_constants_cases() {
        let spec = ProblemSpec::quadratic(4, 4, CurvatureSpec::Constant { value: 1.0 }, TargetSpec::Zero, 0);
        let c = Problem::new(&spec).unwrap().analytic_constants().unwrap();
        assert_eq!(c.linf_exact, 16.0);
        let one = ProblemSpec::quadratic(
            1,
            1,
            CurvatureSpec::Explicit { values: vec![vec![2.5]] },
            TargetSpec::Zero,
            0,
        );
        let c = Problem::new(&one).unwrap().analytic_constants().unwrap();
        assert_eq!((c.linf_exact, c.l2_lower, c.l2_upper), (2.5, 2.5, 2.5));
        let lg = Problem::new(&ProblemSpec::Logistic(LogisticSpec::default())).unwrap();
        assert!(lg.analytic_constants().is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = Problem::new(&ProblemSpec::Mlp2(Mlp2Spec::default())).unwrap();
        assert!(p.loss_and_grad(&[Matrix::<f64>::zeros(2, 2)]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let q = Problem::new(&ProblemSpec::quadratic(
            3,
            4,
            CurvatureSpec::LogUniform { low: 0.5, high: 2.0 },
            TargetSpec::Gaussian { scale: 1.0 },
            3,
        ))
        .unwrap();
        let w: Vec<Matrix<f64>> = vec![Matrix::from_fn(3, 4, |i, j| (i as f64) - 0.3 * j as f64)];
        assert!(fd_gradient_check(&q, &w, 1e-6).unwrap() < 1e-7);

        let spec = ProblemSpec::Logistic(LogisticSpec {
            seed: 37,
            ..LogisticSpec::default()
        });
        let lg = Problem::new(&spec).unwrap();
        let mut ps: Vec<Matrix<f64>> = lg.init_params::<f64>().into_iter().map(|p| p.value).collect();
        ps[0] = Matrix::from_fn(4, 10, |i, j| 0.1 * ((i * 10 + j) as f64).sin());
        assert!(fd_gradient_check(&lg, &ps, 1e-6).unwrap() < 1e-6);

        let spec = ProblemSpec::Mlp2(Mlp2Spec {
            seed: 31,
            ..Mlp2Spec::default()
        });
        let mlp = Problem::new(&spec).unwrap();
        let ps: Vec<Matrix<f64>> = mlp.init_params::<f64>().into_iter().map(|p| p.value).collect();
        assert!(fd_gradient_check(&mlp, &ps, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn f32_evaluation_tracks_f64() {
        let p = Problem::new(&ProblemSpec::Mlp2(Mlp2Spec::default())).unwrap();
        let p64: Vec<Matrix<f64>> = p.init_params::<f64>().into_iter().map(|g| g.value).collect();
        let p32: Vec<Matrix<f32>> = p.init_params::<f32>().into_iter().map(|g| g.value).collect();
        let (l64, _) = p.loss_and_grad(&p64).unwrap();
        let (l32, _) = p.loss_and_grad(&p32).unwrap();
        assert!((l64 - l32 as f64).abs() < 1e-4 * l64.abs().max(1.0));
    }
}
