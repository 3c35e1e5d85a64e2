//! Example configurations and the generated configuration reference.

use lmo_core::flops::FlopOptions;
use lmo_core::optim::{OptimConfig, Period};
use lmo_core::problems::{CurvatureSpec, NoiseSpec, ProblemSpec, QuadraticSpec, TargetSpec};
use lmo_core::theory::{BoundVariant, PhiCriterion, TheoryInputs};

use crate::config::{FlopsSpec, PhiSpec, RunSpec, ShapeSpec, SweepAxes, SweepSpec, TheorySpec};

fn quadratic(rows: usize, cols: usize, seed: u64) -> ProblemSpec {
    ProblemSpec::QuadraticDiag(QuadraticSpec {
        rows,
        cols,
        curvature: CurvatureSpec::LogUniform { low: 0.5, high: 2.0 },
        target: TargetSpec::Gaussian { scale: 1.0 },
        init_scale: 0.0,
        seed,
    })
}

/// Noiseless 8×8 quadratic, pure spectral steps, 100 steps.
pub fn minimal_run() -> RunSpec {
    let mut spec = RunSpec::new(
        quadratic(8, 8, 0),
        OptimConfig {
            period: Period::Finite(1),
            ..OptimConfig::default()
        },
        100,
    );
    spec.name = "minimal".into();
    spec.normalize();
    spec
}

/// The full training recipe (warmup plus cosine, weight decay 0.1, clipping
/// 0.5, RMS-matched spectral steps, `P = 2`) on a noisy quadratic.
pub fn recipe_run() -> RunSpec {
    let steps = 6400;
    RunSpec {
        name: "recipe".into(),
        noise: NoiseSpec::student_t(0.05, 3.0, 1.5),
        eval_interval: 50,
        diag_interval: 50,
        seed: 7,
        ..RunSpec::new(quadratic(32, 48, 3), OptimConfig::reference_recipe(steps), steps)
    }
}

/// `η_M ∈ {1,2,3,5,7}·10⁻³` against `η_L ∈ {0.5,1,2,5,10}·10⁻⁵`.
pub fn learning_rate_sweep() -> SweepSpec {
    let steps = 640;
    let mut base = RunSpec {
        name: "grid".into(),
        noise: NoiseSpec::gaussian(0.05),
        eval_interval: 64,
        diag_interval: 64,
        ..RunSpec::new(quadratic(16, 24, 5), OptimConfig::reference_recipe(steps), steps)
    };
    base.normalize();
    SweepSpec {
        base,
        axes: SweepAxes {
            eta_m: vec![1e-3, 2e-3, 3e-3, 5e-3, 7e-3],
            eta_l: vec![0.5e-5, 1e-5, 2e-5, 5e-5, 10e-5],
            ..SweepAxes::default()
        },
        selection: Default::default(),
    }
}

/// Measured trade-off ratios `r_L = 0.25`, `r_ρ = 1.02` with illustrative
/// problem constants.
pub fn theory_example() -> TheorySpec {
    TheorySpec {
        inputs: TheoryInputs {
            l2: 1.0,
            linf: 64.0,
            rho_nuc: 4.0,
            rho_1: 32.0,
            sigma: 1.0,
            kappa: 2.0,
            delta0: 10.0,
            e0_l1: 1.0,
            m: 32,
            n: 48,
            k_ns: 5,
        },
        eps: 0.1,
        period: Period::Finite(2),
        alpha_scale: 150.0,
        variant: BoundVariant::Plain,
        phi: PhiSpec {
            r_l: Some(0.25),
            r_rho: Some(1.02),
            alpha: None,
            p_max: 20,
            criterion: PhiCriterion::Approx,
        },
    }
}

pub fn flops_example() -> FlopsSpec {
    FlopsSpec {
        shapes: ["124M", "355M", "720M"]
            .iter()
            .map(|n| ShapeSpec::Preset { name: n.to_string() })
            .collect(),
        ns_iters: 5,
        periods: vec![Period::Finite(1), Period::Finite(2), Period::Finite(5), Period::Infinite],
        options: FlopOptions::default(),
        bytes_per_elem: 2,
    }
}

/// `(file name, pretty JSON)` of every shipped example.
pub fn example_files() -> Vec<(&'static str, String)> {
    fn pretty<T: serde::Serialize>(v: &T) -> String {
        serde_json::to_string_pretty(v).expect("serializable") + "\n"
    }
    vec![
        ("minimal_quadratic.json", pretty(&minimal_run())),
        ("recipe_run.json", pretty(&recipe_run())),
        ("lr_sweep.json", pretty(&learning_rate_sweep())),
        ("theory.json", pretty(&theory_example())),
        ("flops.json", pretty(&flops_example())),
    ]
}

const FIELDS: &str = r#"## Run config (`lmo-optim run`)

| key | default | notes |
|---|---|---|
| `name` | `"run"` | label used in summaries |
| `problem` | required | object tagged by `family` |
| `noise` | `{"family": "none"}` | additive gradient noise |
| `optimizer` | see below | |
| `total_steps` | required | must be divisible by a finite `optimizer.period` |
| `eval_interval` | `1` | a CSV row every this many steps, plus the last step; `<= total_steps` |
| `diag_interval` | `10` | diagnostic columns every this many steps (they cost an SVD) |
| `seed` | `0` | noise stream seed; `--seed` overrides it |
| `output_path` | `run.csv` | CSV path, relative to `--out` |
| `precision` | `"f64"` | `"f64"` or `"f32"` |

### `problem`

* `{"family": "quadratic_diag", "rows", "cols", "curvature", "target", "init_scale": 0, "seed": 0}`:
  `f(W) = ½ Σ h_ij (W_ij − W*_ij)²`.
  `curvature` is `{"kind": "constant", "value"}` (default value 1), `{"kind": "log_uniform", "low", "high"}`
  or `{"kind": "explicit", "values": [[...]]}`; entries must be positive.
  `target` is `{"kind": "zero"}`, `{"kind": "gaussian", "scale"}` (default, scale 1),
  `{"kind": "rank_one", "scale"}` or `{"kind": "explicit", "values"}`.
* `{"family": "logistic", "features": 10, "classes": 4, "samples": 256, "separation": 2.0, "seed": 0}`
* `{"family": "mlp2", "inputs": 8, "hidden": 32, "outputs": 4, "samples": 128, "target_noise": 0.1, "seed": 0}`
  (at most 10⁴ parameters)

### `noise`

`family` is `none`, `gaussian` or `student_t`; `scale` (default 0), `dof` (default 3, student_t needs
`dof > max(1, kappa_target)`), `kappa_target` in (1, 2] (default 2).

### `optimizer`

| key | default | notes |
|---|---|---|
| `period` | `2` | positive integer or `"inf"` |
| `eta_m`, `eta_l` | `0.003`, `2e-5` | spectral and sign learning rates |
| `beta1`, `beta2` | `0.9`, `0.99` | direction and buffer momentum, in [0, 1) |
| `weight_decay` | `0` | decoupled |
| `ns_preset` | muon-quintic | `{"name", "coefficients": [a, b, c], "default_iterations"}` |
| `ns_iters` | `5` | |
| `ns_scale` | `"none"` | `"muon_rms"` multiplies by `0.2·√max(m, n)` |
| `clip_global_norm` | `null` | joint Frobenius clipping |
| `schedule` | constant | `{"warmup_steps", "total_steps", "floor_fraction"}`; `total_steps = 0` takes the run length |
| `branch_mode` | `"periodic"` | `"adaptive"` picks the spectral branch when the stable rank is at most `adaptive_alpha·min(m, n)` |
| `adaptive_alpha` | `0.01` | in (0, 1] |
| `power_iters` | `20` | |
| `base_seed` | `0` | power-iteration seeds |
| `momentum_form` | `"ema"` | or `"heavy_ball"` |
| `adamw` | lr 1e-3, betas 0.9/0.999, eps 1e-8 | used for vector parameters |

## Sweep config (`lmo-optim sweep`)

`{"base": <run config>, "axes": {"period": [...], "eta_m": [...], "eta_l": [...], "adaptive_alpha": [...]}, "selection": "min_best_loss"}`.
An empty or missing axis keeps the base value. Cell `i` uses seed `base.seed + i`. The selected cell has
the lowest best loss; ties go to smaller `eta_m`, then `eta_l`, then `period`.

## Theory config (`lmo-optim theory`)

`inputs` holds `L2`, `Linf`, `rho_nuc`, `rho_1`, `sigma`, `kappa`, `delta0`, `e0_l1`, `m`, `n`, `k_ns` (default 5).
Optional: `eps` (0.1), `period` (2), `alpha_scale` (150, the ratio `eta_m / eta_l`), `variant`
(`"plain"` or `"weight_decay"`), `phi` (`r_l` and `r_rho`, or `alpha`; `p_max` 20; `criterion` `"approx"` or `"exact"`).

## Flops config (`lmo-optim flops`)

`shapes` is a list of `{"kind": "preset", "name": "124M"}`, `{"kind": "gpt2_like", "name", "layers", "dim", "seq_len", "batch", "vocab": 50304}`
or `{"kind": "custom", ...}` with an explicit matrix list. Optional: `ns_iters` (5), `periods` (`[1, 2, 5, "inf"]`),
`options` (`include_embeddings`, `include_attention`, both true), `bytes_per_elem` (2).
"#;

/// The generated `CONFIG_REFERENCE.md`.
pub fn reference_document() -> String {
    let mut out = String::from("# Configuration reference\n\nGenerated by `lmo_optim::reference::reference_document`; do not edit by hand.\n\n");
    out.push_str(FIELDS);
    out.push_str("\n## Examples\n");
    for (name, text) in example_files() {
        out.push_str(&format!("\n### `{name}`\n\n```json\n{text}```\n"));
    }
    out
}
