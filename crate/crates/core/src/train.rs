//! The adversarial training loop, evaluation, snapshots and sweeps.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::autodiff::Graph;
use crate::checkpoint::Checkpoint;
use crate::config::{HeadKind, RunConfig, KEYS};
use crate::cr_head::{CCRHead, CRHead};
use crate::data::{write_csv, Batch, GmmSpec, LatentSpec};
use crate::error::{Error, Result};
use crate::loss::{d_loss, g_loss};
use crate::metrics::{frechet_distance_samples, mode_report, ModeReport};
use crate::model::{hidden_then_linear, Discriminator, Generator, Head, GENERATOR_CLASS_DIM};
use crate::nn::{Activation, ClassEmbedding, DenseLayer, Mlp, Parameters};
use crate::optim::{AdamConfig, AdamState, AltSchedule, Role};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;

/// Points written per snapshot.
pub const SNAPSHOT_POINTS: usize = 2000;

/// Prefix of the one log line that varies between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# started_unix=";

/// The eight-mode ring, labeled for the conditional task.
pub fn mixture(cfg: &RunConfig) -> GmmSpec {
    let mut spec = GmmSpec::ring8();
    spec.labeled = cfg.task.is_conditional();
    spec
}

/// Fresh networks on the `Init` stream: generator layers, its class
/// embedding, discriminator trunk, then the head.
pub fn build_models(cfg: &RunConfig) -> Result<(Generator, Discriminator)> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed, Stream::Init);
    let conditional = cfg.task.is_conditional();
    let classes = mixture(cfg).num_modes();

    let g_in = cfg.latent_dim + if conditional { GENERATOR_CLASS_DIM } else { 0 };
    let g_dims: Vec<usize> = std::iter::once(g_in)
        .chain(cfg.g_widths.iter().copied())
        .chain(std::iter::once(2))
        .collect();
    let net = Mlp::new(
        &g_dims,
        hidden_then_linear(cfg.g_widths.len(), Activation::Relu),
        false,
        &mut rng,
    )?;
    let class_embedding = conditional.then(|| ClassEmbedding::new(classes, GENERATOR_CLASS_DIM, &mut rng));
    let generator = Generator { net, class_embedding };

    let d_dims: Vec<usize> = std::iter::once(2).chain(cfg.d_widths.iter().copied()).collect();
    let leaky = Activation::LeakyRelu(Activation::DEFAULT_LEAKY_SLOPE);
    let trunk = Mlp::new(&d_dims, vec![leaky; cfg.d_widths.len()], cfg.spectral_norm, &mut rng)?;
    let features = *d_dims.last().expect("non-empty");
    let head = match (cfg.head, conditional) {
        (HeadKind::Dense, _) => Head::Dense(DenseLayer::new(features, 1, false, cfg.spectral_norm, &mut rng)),
        (HeadKind::Cascade, false) => Head::Cascade(CRHead::new(cfg.n_heads, features, cfg.spectral_norm, &mut rng)?),
        (HeadKind::Cascade, true) => Head::Conditional(CCRHead::new(
            cfg.n_heads,
            features,
            classes,
            cfg.spectral_norm,
            &mut rng,
        )?),
    };
    Ok((generator, Discriminator { trunk, head }))
}

/// Draws conditioning labels (conditional task only), then `n` latents, and
/// pushes them through `generator`.
pub fn generate(generator: &Generator, spec: &GmmSpec, n: usize, rng: &mut Rng) -> Result<Batch> {
    let labels = generator.is_conditional().then(|| spec.sample_labels(n, rng));
    let z = LatentSpec::new(generator.latent_dim())?.sample(n, rng);
    let points = generator.generate(&z, labels.as_deref())?;
    if !points.is_finite() {
        return Err(Error::NonFinite("generated samples".into()));
    }
    Ok(Batch { points, labels })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub fd: f64,
    pub report: ModeReport,
}

impl MetricRow {
    fn csv(&self) -> String {
        let r = &self.report;
        let mut line = format!(
            "{},{},{},{}",
            self.iter, self.fd, r.modes_covered, r.high_quality_fraction
        );
        if let Some(acc) = r.class_accuracy {
            let _ = write!(line, ",{acc}");
        }
        line
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    /// Micro-step index under the alternating schedule.
    pub step: usize,
    pub role: Role,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct RunLog {
    pub config: RunConfig,
    /// One row per evaluation, iteration 0 first.
    pub rows: Vec<MetricRow>,
    pub losses: Vec<LossRecord>,
    pub wall_clock: Duration,
}

impl RunLog {
    pub fn final_row(&self) -> &MetricRow {
        self.rows.last().expect("iteration 0 is always evaluated")
    }

    pub fn final_report(&self) -> &ModeReport {
        &self.final_row().report
    }

    pub fn final_fd(&self) -> f64 {
        self.final_row().fd
    }

    /// Column header of the metric rows.
    pub fn csv_header(&self) -> &'static str {
        if self.config.task.is_conditional() {
            "iter,fd,modes_covered,hq_fraction,class_acc"
        } else {
            "iter,fd,modes_covered,hq_fraction"
        }
    }

    /// Config echo, column header and metric rows: `log.csv` minus the timestamp line.
    pub fn metrics_csv(&self) -> String {
        let mut out = config_echo(&self.config);
        out.push_str(self.csv_header());
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv());
            out.push('\n');
        }
        out
    }
}

fn config_echo(cfg: &RunConfig) -> String {
    KEYS.iter()
        .map(|k| format!("# {k}={}\n", cfg.get(k).unwrap_or_default()))
        .collect()
}

fn role_tag(role: Role) -> &'static str {
    match role {
        Role::Discriminator => "D",
        Role::Generator => "G",
    }
}

/// Generator, discriminator, their optimizers and the run's random streams.
pub struct Trainer {
    pub cfg: RunConfig,
    pub spec: GmmSpec,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub opt_g: AdamState,
    pub opt_d: AdamState,
    pub data_rng: Rng,
    pub latent_rng: Rng,
    pub eval_rng: Rng,
    pub snapshot_rng: Rng,
    pub g_updates: usize,
    latent: LatentSpec,
    g_names: Vec<String>,
    d_names: Vec<String>,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let (generator, discriminator) = build_models(&cfg)?;
        let adam = AdamConfig {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            ..AdamConfig::default()
        };
        let opt_g = AdamState::new(adam, &generator.parameters());
        let opt_d = AdamState::new(adam, &discriminator.parameters());
        Ok(Trainer {
            spec: mixture(&cfg),
            latent: LatentSpec::new(cfg.latent_dim)?,
            g_names: generator.parameter_names(),
            d_names: discriminator.parameter_names(),
            data_rng: Rng::new(cfg.seed, Stream::Data),
            latent_rng: Rng::new(cfg.seed, Stream::Latent),
            eval_rng: Rng::new(cfg.seed, Stream::Eval),
            snapshot_rng: Rng::new(cfg.seed, Stream::Snapshot),
            generator,
            discriminator,
            opt_g,
            opt_d,
            g_updates: 0,
            cfg,
        })
    }

    fn fake_inputs(&mut self) -> (Tensor, Option<Vec<usize>>) {
        let b = self.cfg.batch_size;
        let labels = self
            .generator
            .is_conditional()
            .then(|| self.spec.sample_labels(b, &mut self.latent_rng));
        (self.latent.sample(b, &mut self.latent_rng), labels)
    }

    /// One discriminator update on a fresh real batch and a fresh fake batch.
    pub fn d_step(&mut self) -> Result<f64> {
        let real = self.spec.sample(self.cfg.batch_size, &mut self.data_rng);
        let (z, labels) = self.fake_inputs();
        let fake = self.generator.generate(&z, labels.as_deref())?;

        let mut g = Graph::new();
        let d = self.discriminator.bind(&mut g, true)?;
        let xr = g.input(real.points)?;
        let xf = g.input(fake)?;
        let sr = d.forward(&mut g, xr, real.labels.as_deref())?;
        let sf = d.forward(&mut g, xf, labels.as_deref())?;
        let loss = d_loss(&mut g, self.cfg.loss_form, sr, sf)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?;
        let grads: Vec<Tensor> = d.params().into_iter().map(|p| grads.get_or_zero(p)).collect();
        self.opt_d
            .step(&mut self.discriminator.parameters_mut(), &grads, &self.d_names)?;
        Ok(value)
    }

    /// One generator update through the current discriminator.
    pub fn g_step(&mut self) -> Result<f64> {
        let (z, labels) = self.fake_inputs();
        let mut g = Graph::new();
        let gen = self.generator.bind(&mut g)?;
        let d = self.discriminator.bind(&mut g, true)?;
        let zi = g.input(z)?;
        let x = gen.forward(&mut g, zi, labels.as_deref())?;
        let s = d.forward(&mut g, x, labels.as_deref())?;
        let loss = g_loss(&mut g, self.cfg.loss_form, s)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?;
        let grads: Vec<Tensor> = gen.params().into_iter().map(|p| grads.get_or_zero(p)).collect();
        self.opt_g
            .step(&mut self.generator.parameters_mut(), &grads, &self.g_names)?;
        self.g_updates += 1;
        Ok(value)
    }

    /// Fréchet distance and mode report on `eval_samples` fresh real and generated points.
    pub fn evaluate(&mut self) -> Result<MetricRow> {
        let n = self.cfg.eval_samples;
        let real = self.spec.sample(n, &mut self.eval_rng);
        let fake = generate(&self.generator, &self.spec, n, &mut self.eval_rng)?;
        let fd = frechet_distance_samples(&real.points, &fake.points)?;
        let report = mode_report(&fake.points, &self.spec, fake.labels.as_deref())?;
        Ok(MetricRow {
            iter: self.g_updates,
            fd,
            report,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config_text: self.cfg.to_text(),
            g_updates: self.g_updates as u64,
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            rng_states: [&self.data_rng, &self.latent_rng, &self.eval_rng, &self.snapshot_rng]
                .iter()
                .map(|r| r.state())
                .collect(),
        }
    }

    /// Writes `snapshot_<iter>.csv` (and `.svg` when enabled) into `dir`.
    pub fn snapshot(&mut self, dir: &Path) -> Result<Batch> {
        let path = dir.join(format!("snapshot_{}.csv", self.g_updates));
        let fake = snapshot(
            &self.generator,
            &self.spec,
            SNAPSHOT_POINTS,
            &mut self.snapshot_rng,
            &path,
        )?;
        if self.cfg.snapshot_svg {
            let real = self.spec.sample(SNAPSHOT_POINTS, &mut self.snapshot_rng);
            write_svg(&path.with_extension("svg"), &real, &fake, &self.spec)?;
        }
        Ok(fake)
    }
}

/// Generates `n` points and writes them as `x,y[,label]` CSV to `path`.
pub fn snapshot(generator: &Generator, spec: &GmmSpec, n: usize, rng: &mut Rng, path: &Path) -> Result<Batch> {
    let batch = generate(generator, spec, n, rng)?;
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(&mut out, &batch)?;
    out.flush()?;
    Ok(batch)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Scatter plot: real points grey, generated points colored by label (red
/// when unlabeled), mode centers as black crosses. Plot range is ±3 on both axes.
pub fn write_svg(path: &Path, real: &Batch, fake: &Batch, spec: &GmmSpec) -> Result<()> {
    const SIZE: f64 = 480.0;
    const RANGE: f64 = 3.0;
    let px = |x: f64| (x + RANGE) / (2.0 * RANGE) * SIZE;
    let py = |y: f64| (RANGE - y) / (2.0 * RANGE) * SIZE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for j in 0..real.len() {
        let [x, y] = real.point(j);
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#bbbbbb"/>"##,
            px(x),
            py(y)
        );
    }
    for j in 0..fake.len() {
        let [x, y] = fake.point(j);
        let colour = fake
            .labels
            .as_ref()
            .map_or("#d62728", |l| PALETTE[l[j] % PALETTE.len()]);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{colour}" fill-opacity="0.6"/>"#,
            px(x),
            py(y)
        );
    }
    for c in &spec.centers {
        let (x, y) = (px(c[0]), py(c[1]));
        let _ = writeln!(
            s,
            r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="black" stroke-width="1.5"/>"#,
            x - 5.0,
            y - 5.0,
            x + 5.0,
            y + 5.0,
            x - 5.0,
            y + 5.0,
            x + 5.0,
            y - 5.0
        );
    }
    s.push_str("</svg>\n");
    fs::write(path, s)?;
    Ok(())
}

/// Iterations `total·k/4` for `k = 1..=4`, without zero or duplicates.
pub fn snapshot_iters(total: usize) -> Vec<usize> {
    let mut iters: Vec<usize> = (1..=4).map(|k| total * k / 4).filter(|&i| i > 0).collect();
    iters.dedup();
    iters
}

fn as_divergence(step: usize, err: Error) -> Error {
    match err {
        Error::NonFinite(_) | Error::Numeric(_) | Error::DegenerateWeight { .. } => Error::Divergence {
            step,
            reason: err.to_string(),
        },
        other => other,
    }
}

struct OutputFiles {
    dir: PathBuf,
    log: BufWriter<File>,
    losses: BufWriter<File>,
}

impl OutputFiles {
    fn create(dir: &Path, cfg: &RunConfig, header: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut log = BufWriter::new(File::create(dir.join("log.csv"))?);
        writeln!(log, "{TIMESTAMP_PREFIX}{started}")?;
        log.write_all(config_echo(cfg).as_bytes())?;
        writeln!(log, "{header}")?;
        log.flush()?;
        let mut losses = BufWriter::new(File::create(dir.join("losses.csv"))?);
        writeln!(losses, "step,role,loss")?;
        Ok(OutputFiles {
            dir: dir.to_path_buf(),
            log,
            losses,
        })
    }

    fn row(&mut self, row: &MetricRow, trainer: &Trainer) -> Result<()> {
        writeln!(self.log, "{}", row.csv())?;
        self.log.flush()?;
        self.losses.flush()?;
        trainer.checkpoint().save(&self.dir.join("checkpoint.bin"))
    }
}

/// Runs the alternating schedule for `cfg.total_g_updates` generator updates.
///
/// Metrics are taken at iteration 0, every `eval_every` generator updates and
/// at the end; each evaluation also refreshes `checkpoint.bin`. A non-finite
/// loss, gradient or sample stops the run with [`Error::Divergence`] and
/// leaves the previous checkpoint in place.
pub fn train(cfg: &RunConfig) -> Result<RunLog> {
    let start = Instant::now();
    let mut trainer = Trainer::new(cfg.clone())?;
    let mut log = RunLog {
        config: cfg.clone(),
        rows: Vec::new(),
        losses: Vec::new(),
        wall_clock: Duration::ZERO,
    };
    let mut files = match &cfg.out_dir {
        Some(dir) => Some(OutputFiles::create(dir, cfg, log.csv_header())?),
        None => None,
    };
    if let Some(f) = &files {
        let mut rng = Rng::new(cfg.seed, Stream::Snapshot).substream(0);
        let real = trainer.spec.sample(cfg.eval_samples, &mut rng);
        write_csv(BufWriter::new(File::create(f.dir.join("gmm.csv"))?), &real)?;
    }

    let first = trainer.evaluate().map_err(|e| as_divergence(0, e))?;
    if let Some(f) = &mut files {
        f.row(&first, &trainer)?;
    }
    log.rows.push(first);

    let snapshots = snapshot_iters(cfg.total_g_updates);
    let schedule = AltSchedule {
        d_steps_per_g: cfg.d_steps_per_g,
    };
    for step in 0..schedule.micro_steps(cfg.total_g_updates) {
        let role = schedule.role(step);
        let loss = match role {
            Role::Discriminator => trainer.d_step(),
            Role::Generator => trainer.g_step(),
        }
        .map_err(|e| as_divergence(step, e))?;
        log.losses.push(LossRecord { step, role, loss });
        if let Some(f) = &mut files {
            writeln!(f.losses, "{step},{},{loss}", role_tag(role))?;
        }
        if role != Role::Generator {
            continue;
        }
        let it = trainer.g_updates;
        if it % cfg.eval_every == 0 || it == cfg.total_g_updates {
            let row = trainer.evaluate().map_err(|e| as_divergence(step, e))?;
            if let Some(f) = &mut files {
                f.row(&row, &trainer)?;
            }
            log.rows.push(row);
        }
        if snapshots.contains(&it) {
            if let Some(f) = &files {
                let dir = f.dir.clone();
                trainer.snapshot(&dir).map_err(|e| as_divergence(step, e))?;
            }
        }
    }
    if let Some(f) = &mut files {
        f.losses.flush()?;
        f.log.flush()?;
    }
    log.wall_clock = start.elapsed();
    Ok(log)
}

/// Final metrics of one sweep cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellResult {
    pub final_fd: f64,
    pub modes_covered: usize,
    pub hq_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub n_heads: usize,
    pub seed: u64,
    /// Child-run errors are kept as messages so the rest of the sweep completes.
    pub outcome: std::result::Result<CellResult, String>,
}

/// Mean and sample standard deviation (`n − 1`; 0 for a single value).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NStats {
    pub n_heads: usize,
    pub final_fd: MeanStd,
    pub modes_covered: MeanStd,
    pub hq_fraction: MeanStd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub n_values: Vec<usize>,
    /// One cell per `(N, seed)`, `N`-major in the order given.
    pub cells: Vec<SweepCell>,
}

impl SweepSummary {
    /// Statistics over the successful cells for `n_heads`.
    pub fn stats(&self, n_heads: usize) -> Option<NStats> {
        let ok: Vec<CellResult> = self
            .cells
            .iter()
            .filter(|c| c.n_heads == n_heads)
            .filter_map(|c| c.outcome.as_ref().ok().copied())
            .collect();
        let col = |f: fn(&CellResult) -> f64| MeanStd::of(&ok.iter().map(f).collect::<Vec<_>>());
        Some(NStats {
            n_heads,
            final_fd: col(|c| c.final_fd)?,
            modes_covered: col(|c| c.modes_covered as f64)?,
            hq_fraction: col(|c| c.hq_fraction)?,
        })
    }

    /// `n_heads,trial,final_fd,modes_covered,hq_fraction`: one row per trial,
    /// then `mean` and `std` rows per `N`. Failed trials are listed as comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_heads,trial,final_fd,modes_covered,hq_fraction\n");
        for &n in &self.n_values {
            for cell in self.cells.iter().filter(|c| c.n_heads == n) {
                if let Ok(r) = &cell.outcome {
                    let _ = writeln!(
                        out,
                        "{n},{},{},{},{}",
                        cell.seed, r.final_fd, r.modes_covered, r.hq_fraction
                    );
                }
            }
            if let Some(s) = self.stats(n) {
                let _ = writeln!(
                    out,
                    "{n},mean,{},{},{}",
                    s.final_fd.mean, s.modes_covered.mean, s.hq_fraction.mean
                );
                let _ = writeln!(
                    out,
                    "{n},std,{},{},{}",
                    s.final_fd.std, s.modes_covered.std, s.hq_fraction.std
                );
            }
        }
        for cell in &self.cells {
            if let Err(msg) = &cell.outcome {
                let _ = writeln!(out, "# failed n_heads={} seed={}: {msg}", cell.n_heads, cell.seed);
            }
        }
        out
    }
}

/// Trains every `(N, seed)` pair, in parallel, each into
/// `out_dir/N<n>_seed<s>/`, and writes `out_dir/summary.csv`.
pub fn sweep(base: &RunConfig, n_values: &[usize], seeds: &[u64]) -> Result<SweepSummary> {
    if n_values.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one N and one seed".into()));
    }
    let jobs: Vec<(usize, u64)> = n_values
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(n_heads, seed)| {
            let mut cfg = base.clone();
            cfg.n_heads = n_heads;
            cfg.seed = seed;
            cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("N{n_heads}_seed{seed}")));
            let outcome = cfg
                .validate()
                .and_then(|_| train(&cfg))
                .map(|log| CellResult {
                    final_fd: log.final_fd(),
                    modes_covered: log.final_report().modes_covered,
                    hq_fraction: log.final_report().high_quality_fraction,
                })
                .map_err(|e| e.to_string());
            SweepCell { n_heads, seed, outcome }
        })
        .collect();
    let summary = SweepSummary {
        n_values: n_values.to_vec(),
        cells,
    };
    if let Some(dir) = &base.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), summary.to_csv())?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            g_widths: vec![8],
            d_widths: vec![8],
            n_heads: 2,
            batch_size: 8,
            total_g_updates: 3,
            eval_every: 2,
            eval_samples: 50,
            out_dir: None,
            ..RunConfig::default()
        }
    }

    #[test]
    fn zero_updates_logs_only_iteration_zero() {
        let log = train(&RunConfig {
            total_g_updates: 0,
            ..tiny()
        })
        .unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].iter, 0);
        assert!(log.losses.is_empty());
    }

    #[test]
    fn evaluations_at_multiples_and_end() {
        let log = train(&tiny()).unwrap();
        let iters: Vec<usize> = log.rows.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 2, 3]);
        assert_eq!(log.losses.len(), 18);
        assert_eq!(log.losses[5].role, Role::Generator);
    }

    #[test]
    fn snapshot_schedule() {
        assert_eq!(snapshot_iters(4000), vec![1000, 2000, 3000, 4000]);
        assert_eq!(snapshot_iters(2), vec![1, 2]);
        assert_eq!(snapshot_iters(1), vec![1]);
        assert!(snapshot_iters(0).is_empty());
    }

    #[test]
    fn mean_std_conventions() {
        assert_eq!(MeanStd::of(&[]), None);
        assert_eq!(MeanStd::of(&[3.0]), Some(MeanStd { mean: 3.0, std: 0.0 }));
        let s = MeanStd::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    #[test]
    fn conditional_models_have_embeddings() {
        let cfg = RunConfig {
            task: crate::config::Task::Gmm8Conditional,
            ..tiny()
        };
        let (g, d) = build_models(&cfg).unwrap();
        assert!(g.is_conditional());
        assert!(d.head.is_conditional());
        assert_eq!(g.latent_dim(), 2);
    }
}
