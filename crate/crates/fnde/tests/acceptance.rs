//! Acceptance run: one PASS/FAIL line per criterion, each at its stated
//! tolerance, followed by indented measurements.
//!
//! `FNDE_ACCEPTANCE_STRICT=1` exits non-zero when any line fails.
//! `FNDE_ACCEPTANCE_FULL_SWEEP=1` runs the full five-seed discretization
//! sweep instead of projecting its runtime from measured epoch costs.

use std::f64::consts::PI;
use std::io::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use fnde::dataset::dataset_csv_bytes;
use fnde::experiments::{run_discretization, run_experiment, ExperimentName, ExperimentSpec};
use fnde_core::circulant::{circulant_embed, circulant_extract};
use fnde_core::extraction::{
    density_columns, extract_density, extract_hamiltonian, hamiltonian_from_field, node_state_at, plant_density,
    self_consistency,
};
use fnde_core::fft::{dft2, idft2};
use fnde_core::linalg::mat_inverse;
use fnde_core::models::{init_params, Batch};
use fnde_core::ode::{integrate, FnField, TimeSpan};
use fnde_core::theory::{default_dataset, generate_dataset, s_matrix, DEFAULT_MASSES};
use fnde_core::training::{batch_loss, fractional_loss, loss_and_grad, lr_at, train};
use fnde_core::{
    Complex64, ComplexMatrix, Dataset, LossHistory, ModelKind, ModelParams, MomentumGrid, Theory, TheoryConfig,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, title: &str, seconds: f64) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id}] {title} ({seconds:.1} s)", if pass { "PASS" } else { "FAIL" });
        let _ = std::io::stdout().flush();
    }

    fn note(&self, text: impl AsRef<str>) {
        println!("       {}", text.as_ref());
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn naive_dft2(x: &ComplexMatrix, sign: f64, scale: f64) -> ComplexMatrix {
    let (r, c) = x.shape();
    ComplexMatrix::from_fn(r, c, |k, l| {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..r {
            for b in 0..c {
                let theta = sign * 2.0 * PI * ((k * a) as f64 / r as f64 + (l * b) as f64 / c as f64);
                acc += x[(a, b)] * Complex64::new(theta.cos(), theta.sin());
            }
        }
        acc * scale
    })
}

fn naive_circular_conv(k: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let n = x.rows();
    ComplexMatrix::from_fn(n, n, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for l in 0..n {
                let (ka, kb) = ((a + n - j) % n, (b + n - l) % n);
                if ka < k.rows() && kb < k.cols() {
                    acc += k[(ka, kb)] * x[(j, l)];
                }
            }
        }
        acc
    })
}

fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn criterion_oracles(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut dft_err, mut idft_err, mut circ_err, mut conv_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let x = random_matrix(&mut rng, r, c);
        dft_err = dft_err.max(rel(&dft2(&x), &naive_dft2(&x, -1.0, 1.0)));
        let inv = naive_dft2(&x, 1.0, 1.0 / (r * c) as f64);
        idft_err = idft_err.max(rel(&idft2(&x, (r, c)).unwrap(), &inv));

        let n = rng.gen_range(1..=8);
        let (kr, kc) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        let kernel = random_matrix(&mut rng, kr, kc);
        let d = circulant_embed(&kernel, n).unwrap();
        circ_err = circ_err.max(circulant_extract(&d, kernel.shape()).unwrap().sub(&kernel).unwrap().max_abs());
        let input = random_matrix(&mut rng, n, n);
        let y = ComplexMatrix::from_vec(n, n, d.matvec(input.as_slice()).unwrap()).unwrap();
        conv_err = conv_err.max(y.sub(&naive_circular_conv(&kernel, &input)).unwrap().max_abs());
    }
    let seconds = start.elapsed().as_secs_f64();
    let pass = dft_err < 1e-12 && idft_err < 1e-12 && circ_err < 1e-12 && conv_err < 1e-10 && seconds < 5.0;
    report.line("1", pass, "transform and circulant oracles on 50 random matrices up to 8x8", seconds);
    report.note(format!(
        "dft2 {dft_err:.1e}, idft2 {idft_err:.1e} (< 1e-12); circulant round trip {circ_err:.1e} (< 1e-12); \
         convolution {conv_err:.1e} (< 1e-10); runtime < 5 s"
    ));
}

fn criterion_integrator(report: &mut Report) {
    let start = Instant::now();
    let decay = FnField {
        dim: 1,
        f: |_t: f64, z: &[f64], out: &mut [f64]| out[0] = -z[0],
    };
    let exact = (-1.0f64).exp();
    let error = |steps: usize| (integrate(&decay, &[1.0], TimeSpan::unit(steps)).unwrap()[0] - exact).abs();
    let (e10, e20) = (error(10), error(20));
    let ratio = e10 / e20;
    let seconds = start.elapsed().as_secs_f64();
    let pass = e10 < 1e-6 && (12.0..=20.0).contains(&ratio) && seconds < 1.0;
    report.line("2", pass, "RK4 on dz/dt = -z", seconds);
    report.note(format!(
        "error at 10 steps {e10:.2e} (< 1e-6); halving ratio {ratio:.2} in [12, 20], order {:.3}",
        ratio.log2()
    ));
}

fn fd_max_rel_error(params: &ModelParams, batch: &Batch) -> f64 {
    const EPS: f64 = 1e-4;
    const FLOOR: f64 = 1e-6;
    let (_, grad) = loss_and_grad(params, batch, 10).unwrap();
    let mut probe = params.clone();
    let fd: Vec<f64> = (0..params.len())
        .map(|i| {
            let base = probe.values[i];
            probe.values[i] = base + EPS;
            let up = batch_loss(&probe, batch, 10).unwrap();
            probe.values[i] = base - EPS;
            let down = batch_loss(&probe, batch, 10).unwrap();
            probe.values[i] = base;
            (up - down) / (2.0 * EPS)
        })
        .collect();
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    grad.iter()
        .zip(&fd)
        .map(|(g, f)| (g - f).abs() / g.abs().max(f.abs()).max(FLOOR * scale))
        .fold(0.0, f64::max)
}

fn criterion_gradients(report: &mut Report) {
    let start = Instant::now();
    let grid = MomentumGrid::new(4, 0.0, 2.0).unwrap();
    let data = generate_dataset(Theory::Phi4, 2, grid, &[0.3], &[1.0]).unwrap();
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for kind in ModelKind::ALL {
        let t = Instant::now();
        let mut params = init_params(kind, 4, 32, 3).unwrap();
        params.momentum_scale = grid.p_max;
        let batch = Batch::new(&data.samples, params.momentum_scale).unwrap();
        let err = fd_max_rel_error(&params, &batch);
        worst = worst.max(err);
        notes.push(format!(
            "{kind}: {} components, max relative error {err:.2e} ({:.1} s)",
            params.len(),
            t.elapsed().as_secs_f64()
        ));
    }
    let seconds = start.elapsed().as_secs_f64();
    report.line("3", worst < 1e-4 && seconds < 60.0, "gradients match central differences on a 4x4 grid", seconds);
    for n in notes {
        report.note(n);
    }
    report.note("tolerance 1e-4 over every component, step 1e-4, runtime < 60 s");
}

struct Trained {
    kind: ModelKind,
    params: ModelParams,
    history: LossHistory,
    seconds: f64,
}

fn train_timed(kind: ModelKind, data: &Dataset, val: &Dataset, config: &TrainConfig) -> Trained {
    let start = Instant::now();
    let (params, history) = train(kind, data, val, config, 0).unwrap();
    Trained {
        kind,
        params,
        history,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_protocol(report: &mut Report, data: &Dataset, val: &Dataset) -> Vec<Trained> {
    let start = Instant::now();
    let config = TrainConfig::default();
    let schedule = [(50, 0.02), (150, 0.01), (300, 0.005)];
    let schedule_ok = schedule.iter().all(|&(e, lr)| lr_at(e, &config) == lr);
    let runs: Vec<Trained> = ModelKind::ALL.iter().map(|&k| train_timed(k, data, val, &config)).collect();
    let mut pass = schedule_ok;
    let mut notes = vec![format!(
        "lr at epochs 50/150/300: {}/{}/{}",
        lr_at(50, &config),
        lr_at(150, &config),
        lr_at(300, &config)
    )];
    for run in &runs {
        let first = run.history.train[0];
        let last = run.history.final_train().unwrap();
        let reduction = first / last;
        let needed = if run.kind == ModelKind::FndeMod { 10.0 } else { 100.0 };
        pass &= reduction >= needed && run.seconds < 600.0;
        notes.push(format!(
            "{}: loss {first:.3e} -> {last:.3e}, reduction {reduction:.3e}x (>= {needed}x), {:.1} s (< 600 s)",
            run.kind, run.seconds
        ));
    }
    report.line("4", pass, "training protocol on phi4 order 1, n_p = 10, 16 samples, 400 epochs", start.elapsed().as_secs_f64());
    for n in notes {
        report.note(n);
    }
    let mut drop_notes = Vec::new();
    let mut visible = true;
    for run in &runs {
        let h = &run.history.train;
        let slope = |a: usize, b: usize| (h[a].log10() - h[b].log10()) / (b - a) as f64;
        let ratios: Vec<f64> = config.lr_drops.iter().map(|&d| slope(d, d + 10) / slope(d - 10, d)).collect();
        visible &= ratios.iter().all(|&r| r > 1.0);
        let shown: Vec<String> = config.lr_drops.iter().zip(&ratios).map(|(d, r)| format!("epoch {d} {r:.2}")).collect();
        drop_notes.push(format!("{}: {}", run.kind, shown.join(", ")));
    }
    report.line("4-lr", visible, "loss descent steepens across each lr halving (slope ratio after/before > 1)", 0.0);
    for n in drop_notes {
        report.note(n);
    }
    report.note("slope = mean log10 decrease per epoch over the 10 epochs after / before the boundary");
    runs
}

fn hamiltonian_norm(params: &ModelParams, grid: &MomentumGrid, lambda: f64) -> f64 {
    match params.kind {
        ModelKind::Node => {
            let config = TheoryConfig::with_cutoff(Theory::Phi4, lambda, 1.0, 1, 10.0 * grid.p_max).unwrap();
            let sample = fnde_core::Sample::generate(config, *grid);
            extract_hamiltonian(params, &sample, 1.0).unwrap().h.frobenius_norm()
        }
        _ => extract_density(params, grid).unwrap().kernel.frobenius_norm(),
    }
}

fn criterion_degenerate(report: &mut Report, grid: MomentumGrid) {
    let start = Instant::now();
    let config = TrainConfig::default();
    let zero = generate_dataset(Theory::Phi4, 1, grid, &[0.0], &DEFAULT_MASSES).unwrap();
    let twin = generate_dataset(Theory::Phi4, 1, grid, &[0.4], &DEFAULT_MASSES).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut monotone_notes = Vec::new();
    let mut monotone = true;
    for kind in ModelKind::ALL {
        let run = train_timed(kind, &zero, &zero, &config);
        let last = run.history.final_train().unwrap();
        pass &= last < 1e-6;
        let mut line = format!("{kind}: final loss {last:.3e} (< 1e-6)");
        if matches!(kind, ModelKind::Node | ModelKind::FndeMod) {
            let twin_run = train_timed(kind, &twin, &twin, &config);
            let h0 = hamiltonian_norm(&run.params, &grid, 0.0);
            let h4 = hamiltonian_norm(&twin_run.params, &grid, 0.4);
            let ratio = h0 / h4;
            pass &= ratio < 0.01;
            let what = if kind == ModelKind::Node { "Hamiltonian" } else { "density" };
            line.push_str(&format!(", {what} norm {h0:.3e} vs twin {h4:.3e}, ratio {ratio:.2e} (< 1e-2)"));
        }
        notes.push(line);
        let h = &run.history.train;
        let rises = h.windows(2).skip(10).filter(|w| w[1] > w[0]).count();
        monotone &= rises == 0;
        monotone_notes.push(format!("{kind}: {rises} rising epochs after epoch 10"));
    }
    report.line("5", pass, "lambda = 0 training reaches loss < 1e-6; extracted operator vanishes", start.elapsed().as_secs_f64());
    for n in notes {
        report.note(n);
    }
    report.line("5-inv", monotone, "lambda = 0 training loss decreases monotonically after epoch 10", 0.0);
    for n in monotone_notes {
        report.note(n);
    }
}

fn criterion_extraction(report: &mut Report, trained: &[Trained], data: &Dataset) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut planted_h = 0.0f64;
    let mut planted_density = 0.0f64;
    for n in [4, 6, 10] {
        let h0 = random_matrix(&mut rng, n, n);
        let s = ComplexMatrix::identity(n).add(&random_matrix(&mut rng, n, n).scale(Complex64::new(0.05, 0.0))).unwrap();
        let r = h0.matmul(&s).unwrap().scale(Complex64::new(0.0, -1.0));
        planted_h = planted_h.max(hamiltonian_from_field(&r, &s).unwrap().sub(&h0).unwrap().max_abs());

        let grid = MomentumGrid::new(n, 0.0, 2.0).unwrap();
        let h_bar = random_matrix(&mut rng, n, n);
        let recovered = extract_density(&plant_density(&h_bar, &grid).unwrap(), &grid).unwrap();
        let expected = h_bar.block(0, 0, n, density_columns(n));
        planted_density = planted_density.max(recovered.kernel.sub(&expected).unwrap().max_abs());
    }

    let node = trained.iter().find(|t| t.kind == ModelKind::Node).unwrap();
    let mut residual = 0.0f64;
    let mut worst_cond = 0.0f64;
    for sample in &data.samples {
        let (s, r) = node_state_at(&node.params, sample, 1.0).unwrap();
        let h = extract_hamiltonian(&node.params, sample, 1.0).unwrap();
        residual = residual.max(self_consistency(&h.h, &s, &r).unwrap());
        let inv = mat_inverse(&s).unwrap();
        worst_cond = worst_cond.max(s.frobenius_norm() * inv.frobenius_norm());
    }
    let fnde_mod = trained.iter().find(|t| t.kind == ModelKind::FndeMod).unwrap();
    let grid = data.provenance.grid;
    let shape = extract_density(&fnde_mod.params, &grid).unwrap().kernel.shape();
    let expected_shape = (grid.n_p, grid.n_p / 2 + 1);

    let pass = planted_h < 1e-10 && planted_density < 1e-10 && residual < 1e-8 && shape == expected_shape;
    report.line("6", pass, "extraction round trips", start.elapsed().as_secs_f64());
    report.note(format!("planted Hamiltonian error {planted_h:.2e} (< 1e-10)"));
    report.note(format!("planted density error {planted_density:.2e} (< 1e-10)"));
    report.note(format!(
        "live NODE self-consistency {residual:.2e} (< 1e-8) over {} samples, Frobenius condition number <= {worst_cond:.1}",
        data.len()
    ));
    report.note(format!("trained density kernel shape {shape:?}, expected {expected_shape:?}"));
}

fn criterion_trends(report: &mut Report, trained: &[Trained], data: &Dataset) {
    let start = Instant::now();
    let config = TrainConfig::default();
    let grid = data.provenance.grid;
    let mut pass = true;
    let mut notes = Vec::new();

    let wide = data.regenerate_on(grid.scaled(2.0).unwrap());
    for run in trained {
        let base = fractional_loss(&run.params, data, config.steps).unwrap();
        let far = fractional_loss(&run.params, &wide, config.steps).unwrap();
        pass &= far > base;
        notes.push(format!("{}: fractional loss ratio 1.0 {base:.3e}, ratio 2.0 {far:.3e} (must increase)", run.kind));
    }

    let mean_power = data
        .samples
        .iter()
        .map(|s| s.target.frobenius_norm().powi(2) / (grid.n_p * grid.n_p) as f64)
        .sum::<f64>()
        / data.len() as f64;
    let mut common = true;
    for run in trained {
        let fractional = run.history.final_train().unwrap() / mean_power;
        common &= fractional <= 1e-2;
        notes.push(format!("{}: final fractional training loss at n_p = 10: {fractional:.2e} (<= 1e-2)", run.kind));
    }
    pass &= common;

    let mut sweep = ExperimentSpec::new(ExperimentName::Discretization);
    sweep.grid_sizes = vec![20, 50];
    sweep.train = sweep.train.with_epochs(2);
    sweep.train.seeds = 1;
    let full = std::env::var("FNDE_ACCEPTANCE_FULL_SWEEP").is_ok_and(|v| v == "1");
    let (completed, sweep_hours, measured) = if full {
        let spec = ExperimentSpec::new(ExperimentName::Discretization);
        let r = run_discretization(&spec).unwrap();
        (r.failures.is_empty() && r.grid_sizes() == [10, 20, 50], r.runtime_seconds / 3600.0, true)
    } else {
        let r = run_discretization(&sweep).unwrap();
        let sweep_epochs = (sweep.train.epochs * sweep.train.seeds) as f64;
        let large_per_epoch = r.runtime_seconds / sweep_epochs;
        let small_per_epoch: f64 = trained.iter().map(|t| t.seconds / config.epochs as f64).sum();
        let seeds = config.seeds as f64;
        let threads = sweep.threads.max(1) as f64;
        let projected = (large_per_epoch + small_per_epoch) * config.epochs as f64 * seeds / threads;
        notes.push(format!(
            "sweep epoch cost: n_p = 10 {small_per_epoch:.2} s, n_p = 20 and 50 together {large_per_epoch:.2} s, all four models"
        ));
        (r.failures.is_empty() && r.runs.len() == 8, projected / 3600.0, false)
    };
    pass &= completed && sweep_hours < 2.0;
    notes.push(format!(
        "discretization sweep over n_p in {{10, 20, 50}} completes: {completed}; full 5-seed sweep runtime {} {sweep_hours:.2} h (< 2 h) on {} thread(s)",
        if measured { "measured" } else { "projected" },
        sweep.threads
    ));

    let smoke_start = Instant::now();
    let mut smoke_ok = true;
    for name in ExperimentName::ALL {
        let report = run_experiment(&ExperimentSpec::smoke(name)).unwrap();
        smoke_ok &= report.failures.is_empty() && report.is_finite();
    }
    let smoke = smoke_start.elapsed().as_secs_f64();
    pass &= smoke_ok && smoke < 60.0;
    notes.push(format!("all five experiments in smoke mode: {smoke:.1} s (< 60 s), clean: {smoke_ok}"));

    report.line("7", pass, "extrapolation and discretization trends", start.elapsed().as_secs_f64());
    for n in notes {
        report.note(n);
    }
}

fn criterion_targets(report: &mut Report) {
    let start = Instant::now();
    let grid = MomentumGrid::default_grid();
    let contribution = |theory: Theory, lambda: f64, k: usize| {
        let cfg = |order| TheoryConfig::with_cutoff(theory, lambda, 1.0, order, 20.0).unwrap();
        let lower = if k == 1 {
            ComplexMatrix::identity(grid.n_p)
        } else {
            s_matrix(&cfg(k - 1), &grid)
        };
        s_matrix(&cfg(k), &grid).sub(&lower).unwrap().frobenius_norm()
    };
    let mut pass = true;
    let mut notes = Vec::new();
    for theory in Theory::ALL {
        let mut slopes = Vec::new();
        for k in 1..=3 {
            let h = 1e-3;
            let lambda = 0.25;
            let slope = (contribution(theory, lambda * (1.0 + h), k).ln() - contribution(theory, lambda * (1.0 - h), k).ln())
                / ((1.0 + h).ln() - (1.0 - h).ln());
            let expected = theory.coupling_power(k) as f64;
            pass &= (slope - expected).abs() <= 0.01;
            slopes.push(format!("k={k}: {slope:.4} (expect {expected})"));
        }
        notes.push(format!("{theory} log-log slopes {}", slopes.join(", ")));
    }
    let identity = Theory::ALL.iter().all(|&theory| {
        (1..=3).all(|order| {
            let cfg = TheoryConfig::with_cutoff(theory, 0.0, 1.0, order, 20.0).unwrap();
            s_matrix(&cfg, &grid) == ComplexMatrix::identity(grid.n_p)
        })
    });
    let deterministic = Theory::ALL.iter().all(|&theory| {
        let a = default_dataset(theory, 3, grid).unwrap();
        let b = default_dataset(theory, 3, grid).unwrap();
        dataset_csv_bytes(&a) == dataset_csv_bytes(&b)
    });
    pass &= identity && deterministic;
    report.line("8", pass, "target generator properties", start.elapsed().as_secs_f64());
    for n in notes {
        report.note(n);
    }
    report.note(format!("S(lambda = 0) == I exactly: {identity}; regenerated datasets byte-identical: {deterministic}"));
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    criterion_oracles(&mut report);
    criterion_integrator(&mut report);
    criterion_gradients(&mut report);

    let grid = MomentumGrid::default_grid();
    let data = default_dataset(Theory::Phi4, 1, grid).unwrap();
    let val = data.regenerate_on(grid.validation_grid());
    let trained = criterion_protocol(&mut report, &data, &val);
    criterion_degenerate(&mut report, grid);
    criterion_extraction(&mut report, &trained, &data);
    criterion_trends(&mut report, &trained, &data);
    criterion_targets(&mut report);

    println!("{} line(s) failed", report.failures);
    let strict = std::env::var("FNDE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && report.failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
