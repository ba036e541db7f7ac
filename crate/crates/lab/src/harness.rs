//! Seeded Monte-Carlo experiments: BER sweeps, the MbSD-SP gap study and
//! the frozen-noise moment study.
//!
//! Seed tree: the frame seed is `derive2(base, FRAME_STREAM, point, frame)`;
//! noise is drawn from `derive(frame, NOISE_STREAM, 0)` and every decoder
//! cell gets `derive(frame, DECODER_STREAM, hash(label))`. Results depend
//! only on the configuration, never on thread count or scheduling.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use stochdec_core::analysis::{self, BoundInputs};
use stochdec_core::channel::{self, ChannelParams, LikelihoodVector};
use stochdec_core::mbsd::{self, MbsdConfig};
use stochdec_core::oracle;
use stochdec_core::sd::{self, SdConfig};
use stochdec_core::seed::{self, DECODER_STREAM, FRAME_STREAM, NOISE_STREAM};
use stochdec_core::sp::{self, SpConfig};
use stochdec_core::FactorGraph;

use crate::config::{DecoderSpec, ExperimentConfig, MomentConfig};
use crate::stats::{self, loglog_slope};
use crate::{LabError, Result};

pub const CSV_SCHEMA: &str = "#stoch-ldpc-csv-v1";

pub const BER_HEADER: [&str; 11] = [
    "decoder",
    "param",
    "nds",
    "ebno_db",
    "frames",
    "bit_errors",
    "frame_errors",
    "ber",
    "fer",
    "wall_seconds",
    "seed",
];

pub const GAP_HEADER: [&str; 9] =
    ["decoder", "nds", "ebno_db", "k", "frames", "sp_ber", "mbsd_ber", "ber_gap", "gap_std"];

pub const SLOPE_HEADER: [&str; 5] = ["decoder", "nds", "ebno_db", "points", "slope"];

pub const MOMENT_HEADER: [&str; 9] =
    ["var", "k", "mean", "variance", "sp_gamma", "oracle_gamma", "lambda_hat", "variance_bound", "message_gap_bound"];

/// Decision rule of the edge-memory baseline, recorded with every result.
pub const SD_RULE: &str = "regenerative bits only enter edge memories; hold states output a uniform draw from the \
memory, or the previous bit while it is empty; hard bits are majority votes of the full-neighborhood equality state \
over a trailing window (default cycles/2), ties to 0";

/// Code rate used for Eb/No: `1 - m/n`.
pub fn design_rate(graph: &FactorGraph) -> f64 {
    1.0 - graph.n_chks() as f64 / graph.n_vars() as f64
}

fn channel_at(graph: &FactorGraph, ebno_db: f64) -> Result<ChannelParams> {
    ChannelParams::at_ebno(ebno_db, design_rate(graph), false).map_err(|e| LabError::Config(e.to_string()))
}

/// One decoder setting inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CellDecoder {
    Sp(SpConfig),
    Mbsd { k: usize, max_iters: usize, nds: bool },
    Sd { cycles: usize, em_length: usize, nds: bool, output_window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub decoder: CellDecoder,
    pub label: String,
}

impl Cell {
    pub fn name(&self) -> &'static str {
        match self.decoder {
            CellDecoder::Sp(_) => "sp",
            CellDecoder::Mbsd { .. } => "mbsd",
            CellDecoder::Sd { .. } => "sd",
        }
    }

    /// Iterations for SP, `K` for MbSD, cycles for SD.
    pub fn param(&self) -> u64 {
        match self.decoder {
            CellDecoder::Sp(c) => c.max_iters as u64,
            CellDecoder::Mbsd { k, .. } => k as u64,
            CellDecoder::Sd { cycles, .. } => cycles as u64,
        }
    }

    pub fn nds(&self) -> bool {
        match self.decoder {
            CellDecoder::Sp(_) => false,
            CellDecoder::Mbsd { nds, .. } | CellDecoder::Sd { nds, .. } => nds,
        }
    }

    fn seed_tag(&self) -> u64 {
        // FNV-1a: stable across runs and platforms.
        self.label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    }

    fn bit_errors(&self, graph: &FactorGraph, llh: &Likelihoods, seed: u64, early_stop: bool) -> u32 {
        let errors = match self.decoder {
            CellDecoder::Sp(c) => sp::decode(graph, &llh.plain, &SpConfig { early_stop, ..c }).bit_errors(),
            CellDecoder::Mbsd { k, max_iters, nds } => {
                let cfg = MbsdConfig { k, max_iters, seed, nds_enabled: nds, early_stop };
                mbsd::decode(graph, llh.pick(nds), &cfg).bit_errors()
            }
            CellDecoder::Sd { cycles, em_length, nds, output_window } => {
                let cfg = SdConfig { cycles, em_length, seed, nds_enabled: nds, output_window, early_stop };
                sd::decode(graph, llh.pick(nds), &cfg).bit_errors()
            }
        };
        errors as u32
    }
}

/// Expands the decoder list into sweep cells, one per `K` for MbSD.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for d in &cfg.decoders {
        match *d {
            DecoderSpec::Sp { max_iters, tol } => out.push(Cell {
                decoder: CellDecoder::Sp(SpConfig { max_iters, early_stop: cfg.early_stop, tol }),
                label: format!("sp:t={max_iters}"),
            }),
            DecoderSpec::Mbsd { ref k, max_iters, nds } => {
                for &k in k {
                    out.push(Cell {
                        decoder: CellDecoder::Mbsd { k, max_iters, nds },
                        label: format!("mbsd:k={k}:t={max_iters}:nds={}", nds as u8),
                    });
                }
            }
            DecoderSpec::Sd { cycles, em_length, nds, output_window } => {
                let output_window = output_window.unwrap_or((cycles / 2).max(1));
                out.push(Cell {
                    decoder: CellDecoder::Sd { cycles, em_length, nds, output_window },
                    label: format!("sd:cycles={cycles}:em={em_length}:w={output_window}:nds={}", nds as u8),
                });
            }
        }
    }
    out
}

struct Likelihoods {
    plain: LikelihoodVector,
    scaled: LikelihoodVector,
}

impl Likelihoods {
    fn pick(&self, nds: bool) -> &LikelihoodVector {
        if nds {
            &self.scaled
        } else {
            &self.plain
        }
    }
}

fn checksum(y: &[f64]) -> u64 {
    y.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
        v.to_bits().to_le_bytes().iter().fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    })
}

/// Frame results of one cell at one Eb/No point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFrames {
    /// Bit errors of every decoded frame, in frame order.
    pub per_frame: Vec<u32>,
    pub wall_seconds: f64,
}

impl CellFrames {
    pub fn frames(&self) -> u64 {
        self.per_frame.len() as u64
    }

    pub fn bit_errors(&self) -> u64 {
        self.per_frame.iter().map(|&e| e as u64).sum()
    }

    pub fn frame_errors(&self) -> u64 {
        self.per_frame.iter().filter(|&&e| e > 0).count() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFrames {
    pub ebno_db: f64,
    /// Checksum of the received word of each frame, shared by every cell.
    pub noise_checksums: Vec<u64>,
    /// Indexed like [`SweepOutcome::cells`].
    pub cells: Vec<CellFrames>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRecord {
    pub decoder: String,
    pub param: u64,
    pub nds: bool,
    pub ebno_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub wall_seconds: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub n_vars: usize,
    pub seed: u64,
    pub cells: Vec<Cell>,
    pub points: Vec<PointFrames>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<BerRecord> {
        let mut out = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for p in &self.points {
                let f = &p.cells[c];
                let frames = f.frames();
                let bits = frames * self.n_vars as u64;
                out.push(BerRecord {
                    decoder: cell.name().to_string(),
                    param: cell.param(),
                    nds: cell.nds(),
                    ebno_db: p.ebno_db,
                    frames,
                    bit_errors: f.bit_errors(),
                    frame_errors: f.frame_errors(),
                    ber: if bits == 0 { 0.0 } else { f.bit_errors() as f64 / bits as f64 },
                    fer: if frames == 0 { 0.0 } else { f.frame_errors() as f64 / frames as f64 },
                    wall_seconds: f.wall_seconds,
                    seed: self.seed,
                });
            }
        }
        out
    }

    pub fn find_cell(&self, name: &str, param: u64, nds: bool) -> Option<usize> {
        self.cells.iter().position(|c| c.name() == name && c.param() == param && c.nds() == nds)
    }

    pub fn point(&self, ebno_db: f64) -> Option<&PointFrames> {
        self.points.iter().find(|p| p.ebno_db == ebno_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Frames dispatched per parallel batch.
    pub batch: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: None, batch: 64 }
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    Ok(b.build()?.install(f))
}

pub fn run_ber_sweep(cfg: &ExperimentConfig, graph: &FactorGraph, opts: RunOptions) -> Result<SweepOutcome> {
    cfg.validate()?;
    let cells = cells(cfg);
    let n = graph.n_vars();
    let max_fe = cfg.max_frame_errors();
    let batch = opts.batch.max(1) as u64;
    let tags: Vec<u64> = cells.iter().map(Cell::seed_tag).collect();

    let mut points = Vec::with_capacity(cfg.ebno_db.len());
    for (pi, &ebno) in cfg.ebno_db.iter().enumerate() {
        let ch = channel_at(graph, ebno)?;
        let mut result: Vec<CellFrames> =
            cells.iter().map(|_| CellFrames { per_frame: Vec::new(), wall_seconds: 0.0 }).collect();
        let mut active: Vec<bool> = vec![true; cells.len()];
        let mut checksums = Vec::new();
        let mut next = 0u64;
        while next < cfg.frames && active.iter().any(|&a| a) {
            let end = (next + batch).min(cfg.frames);
            let live: Vec<usize> = (0..cells.len()).filter(|&c| active[c]).collect();
            let decoded: Vec<(u64, Vec<(u32, f64)>)> = with_pool(opts.threads, || {
                (next..end)
                    .into_par_iter()
                    .map(|f| {
                        let fs = seed::derive2(cfg.seed, FRAME_STREAM, pi as u64, f);
                        let y = channel::transmit_all_zero(
                            n,
                            ch.sigma2,
                            &mut seed::stream(seed::derive(fs, NOISE_STREAM, 0)),
                        );
                        let llh = Likelihoods {
                            plain: channel::likelihoods(&y, ch.sigma2, None).expect("positive variance"),
                            scaled: channel::likelihoods(&y, ch.sigma2, Some(ch.nds_param)).expect("positive variance"),
                        };
                        let outs = live
                            .iter()
                            .map(|&c| {
                                let t = Instant::now();
                                let e = cells[c].bit_errors(
                                    graph,
                                    &llh,
                                    seed::derive(fs, DECODER_STREAM, tags[c]),
                                    cfg.early_stop,
                                );
                                (e, t.elapsed().as_secs_f64())
                            })
                            .collect();
                        (checksum(&y), outs)
                    })
                    .collect()
            })?;
            for (sum, outs) in decoded {
                checksums.push(sum);
                for (&c, (e, secs)) in live.iter().zip(outs) {
                    if !active[c] {
                        continue;
                    }
                    let r = &mut result[c];
                    r.per_frame.push(e);
                    r.wall_seconds += secs;
                    if max_fe.is_some_and(|m| r.frame_errors() >= m) {
                        active[c] = false;
                    }
                }
            }
            next = end;
        }
        // Frames past every cell's stopping point depend on the batch size.
        checksums.truncate(result.iter().map(|r| r.per_frame.len()).max().unwrap_or(0));
        points.push(PointFrames { ebno_db: ebno, noise_checksums: checksums, cells: result });
    }
    Ok(SweepOutcome { n_vars: n, seed: cfg.seed, cells, points })
}

fn schema_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{CSV_SCHEMA}")?;
    Ok(csv::Writer::from_writer(f))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_ber_csv(path: &Path, records: &[BerRecord]) -> Result<()> {
    let mut w = schema_writer(path)?;
    w.write_record(BER_HEADER)?;
    for r in records {
        w.write_record([
            r.decoder.clone(),
            r.param.to_string(),
            (r.nds as u8).to_string(),
            r.ebno_db.to_string(),
            r.frames.to_string(),
            r.bit_errors.to_string(),
            r.frame_errors.to_string(),
            r.ber.to_string(),
            r.fer.to_string(),
            format!("{:.6}", r.wall_seconds),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-frame table: noise checksum and each cell's bit errors (blank after
/// the cell stopped).
pub fn write_frames_csv(path: &Path, sweep: &SweepOutcome) -> Result<()> {
    let mut w = schema_writer(path)?;
    let mut header = vec!["ebno_db".to_string(), "frame".to_string(), "noise_checksum".to_string()];
    header.extend(sweep.cells.iter().map(|c| c.label.clone()));
    w.write_record(&header)?;
    for p in &sweep.points {
        for (f, sum) in p.noise_checksums.iter().enumerate() {
            let mut row = vec![p.ebno_db.to_string(), f.to_string(), format!("{sum:016x}")];
            row.extend(p.cells.iter().map(|c| c.per_frame.get(f).map(|e| e.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metadata<'a, C: Serialize> {
    schema: &'static str,
    config: &'a C,
    n_vars: usize,
    n_chks: usize,
    design_rate: f64,
    seed_tree: &'static str,
    frame_error: &'static str,
    nds_multiplier: &'static str,
    sd_rule: &'static str,
    cells: Vec<CellMeta>,
}

#[derive(Debug, Serialize)]
struct CellMeta {
    label: String,
    early_stop: bool,
}

/// Writes the run description next to a result file.
pub fn write_metadata<C: Serialize>(
    path: &Path,
    config: &C,
    graph: &FactorGraph,
    cells: &[Cell],
    early_stop: bool,
) -> Result<()> {
    let meta = Metadata {
        schema: CSV_SCHEMA,
        config,
        n_vars: graph.n_vars(),
        n_chks: graph.n_chks(),
        design_rate: design_rate(graph),
        seed_tree: "frame = derive2(seed, FRAME, point, frame); noise = derive(frame, NOISE, 0); \
decoder = derive(frame, DECODER, fnv1a(label)); per-variable and per-edge streams below the decoder seed",
        frame_error: "a frame errs when any decoded bit differs from the all-zero codeword",
        nds_multiplier: "sigma^2 times the channel LLR",
        sd_rule: SD_RULE,
        cells: cells.iter().map(|c| CellMeta { label: c.label.clone(), early_stop }).collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// `<out>.<suffix>` next to `out`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub nds: bool,
    pub max_iters: usize,
    pub ebno_db: f64,
    pub k: usize,
    /// Frames decoded by both SP and this MbSD cell.
    pub frames: u64,
    pub sp_ber: f64,
    pub mbsd_ber: f64,
    pub gap: f64,
    pub gap_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSlope {
    pub nds: bool,
    pub max_iters: usize,
    pub ebno_db: f64,
    pub points: usize,
    pub slope: Option<f64>,
}

/// Gap rows and log-log slopes from a sweep holding an SP cell and MbSD
/// cells. Each comparison uses the frames both cells decoded.
pub fn gap_study(sweep: &SweepOutcome) -> Result<(Vec<GapRow>, Vec<GapSlope>)> {
    let sp_cell = sweep
        .cells
        .iter()
        .position(|c| c.name() == "sp")
        .ok_or_else(|| LabError::Config("gap study needs an SP decoder".into()))?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut groups: Vec<(bool, usize)> = Vec::new();
    for c in &sweep.cells {
        if let CellDecoder::Mbsd { nds, max_iters, .. } = c.decoder {
            if !groups.contains(&(nds, max_iters)) {
                groups.push((nds, max_iters));
            }
        }
    }
    if groups.is_empty() {
        return Err(LabError::Config("gap study needs an MbSD decoder".into()));
    }
    let n = sweep.n_vars as f64;
    for p in &sweep.points {
        let sp_frames = &p.cells[sp_cell].per_frame;
        for &(g_nds, g_iters) in &groups {
            let (mut ks, mut gaps) = (Vec::new(), Vec::new());
            for (c, cell) in sweep.cells.iter().enumerate() {
                let CellDecoder::Mbsd { k, max_iters, nds } = cell.decoder else { continue };
                if nds != g_nds || max_iters != g_iters {
                    continue;
                }
                let mb = &p.cells[c].per_frame;
                let cmp = stats::paired(mb, sp_frames);
                let frames = cmp.frames as u64;
                let bits = (frames as f64 * n).max(1.0);
                let sp_ber = sp_frames[..cmp.frames].iter().map(|&e| e as f64).sum::<f64>() / bits;
                let mbsd_ber = mb[..cmp.frames].iter().map(|&e| e as f64).sum::<f64>() / bits;
                let row = GapRow {
                    nds,
                    max_iters,
                    ebno_db: p.ebno_db,
                    k,
                    frames,
                    sp_ber,
                    mbsd_ber,
                    gap: mbsd_ber - sp_ber,
                    gap_std: cmp.std_err / n,
                };
                ks.push(k as f64);
                gaps.push(row.gap);
                rows.push(row);
            }
            let points = gaps.iter().filter(|&&g| g > 0.0).count();
            slopes.push(GapSlope {
                nds: g_nds,
                max_iters: g_iters,
                ebno_db: p.ebno_db,
                points,
                slope: loglog_slope(&ks, &gaps),
            });
        }
    }
    Ok((rows, slopes))
}

pub fn write_gap_csv(path: &Path, rows: &[GapRow]) -> Result<()> {
    let mut w = schema_writer(path)?;
    w.write_record(GAP_HEADER)?;
    for r in rows {
        w.write_record([
            format!("mbsd:t={}", r.max_iters),
            (r.nds as u8).to_string(),
            r.ebno_db.to_string(),
            r.k.to_string(),
            r.frames.to_string(),
            r.sp_ber.to_string(),
            r.mbsd_ber.to_string(),
            r.gap.to_string(),
            r.gap_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slope_csv(path: &Path, slopes: &[GapSlope]) -> Result<()> {
    let mut w = schema_writer(path)?;
    w.write_record(SLOPE_HEADER)?;
    for s in slopes {
        w.write_record([
            format!("mbsd:t={}", s.max_iters),
            (s.nds as u8).to_string(),
            s.ebno_db.to_string(),
            s.points.to_string(),
            opt(s.slope),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Received word of a moment fixture: one noise draw at `ebno_db`.
pub fn frozen_likelihoods(graph: &FactorGraph, ebno_db: f64, noise_seed: u64, nds: bool) -> Result<LikelihoodVector> {
    let ch = channel_at(graph, ebno_db)?;
    let y = channel::transmit_all_zero(
        graph.n_vars(),
        ch.sigma2,
        &mut seed::stream(seed::derive(noise_seed, NOISE_STREAM, 0)),
    );
    Ok(channel::likelihoods(&y, ch.sigma2, nds.then_some(ch.nds_param))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub var: usize,
    pub k: usize,
    pub mean: f64,
    pub variance: f64,
    pub sp_gamma: f64,
    pub oracle_gamma: Option<f64>,
    pub lambda_hat: f64,
    pub variance_bound: f64,
    pub message_gap_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentStudy {
    pub ks: Vec<usize>,
    pub runs: usize,
    pub iterations: usize,
    pub lambda_hat: f64,
    /// SP marginals after `iterations` iterations.
    pub sp_gamma: Vec<f64>,
    pub rows: Vec<MomentRow>,
    /// `estimates[k][run][var]`.
    pub estimates: Vec<Vec<Vec<f64>>>,
}

impl MomentStudy {
    fn row(&self, ki: usize, var: usize) -> &MomentRow {
        &self.rows[ki * self.sp_gamma.len() + var]
    }

    /// `max_i |mean_i - sp_i|` at the `ki`-th `K`.
    pub fn max_bias(&self, ki: usize) -> f64 {
        (0..self.sp_gamma.len()).map(|i| (self.row(ki, i).mean - self.sp_gamma[i]).abs()).fold(0.0, f64::max)
    }

    pub fn bias(&self, ki: usize, var: usize) -> f64 {
        (self.row(ki, var).mean - self.sp_gamma[var]).abs()
    }

    /// Variance averaged over variables at the `ki`-th `K`.
    pub fn mean_variance(&self, ki: usize) -> f64 {
        let n = self.sp_gamma.len();
        (0..n).map(|i| self.row(ki, i).variance).sum::<f64>() / n as f64
    }

    pub fn variance(&self, ki: usize, var: usize) -> f64 {
        self.row(ki, var).variance
    }

    /// Slope of `ln(mean variance)` against `ln K`.
    pub fn variance_slope(&self) -> Option<f64> {
        let xs: Vec<f64> = self.ks.iter().map(|&k| k as f64).collect();
        let ys: Vec<f64> = (0..self.ks.len()).map(|ki| self.mean_variance(ki)).collect();
        loglog_slope(&xs, &ys)
    }
}

/// Independent MbSD decodes of one likelihood vector. Run `r` uses the same
/// seed at every `K`.
#[allow(clippy::too_many_arguments)]
pub fn run_moment_study(
    graph: &FactorGraph,
    llh: &LikelihoodVector,
    ks: &[usize],
    runs: usize,
    iterations: usize,
    eps: f64,
    seed: u64,
    threads: Option<usize>,
) -> Result<MomentStudy> {
    if ks.is_empty() || ks.contains(&0) || runs < 2 || iterations == 0 {
        return Err(LabError::Config("moment study needs K >= 1, runs >= 2, iterations >= 1".into()));
    }
    let n = graph.n_vars();
    let sp_cfg = SpConfig { max_iters: iterations, early_stop: false, tol: 0.0 };
    let (sp_result, history) = sp::decode_traced(graph, llh, &sp_cfg);
    let lambda_hat = analysis::estimate_lambda(graph, llh, &history);
    let oracle =
        if n <= oracle::MAX_ENUMERATION_VARS { Some(oracle::exact_bitwise_map(graph, llh)?.marginals) } else { None };

    let per_run: Vec<Vec<Vec<f64>>> = with_pool(threads, || {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let s = seed::derive(seed, FRAME_STREAM, r as u64);
                ks.iter()
                    .map(|&k| {
                        let cfg =
                            MbsdConfig { k, max_iters: iterations, seed: s, nds_enabled: false, early_stop: false };
                        mbsd::decode(graph, llh, &cfg).marginal_estimates()
                    })
                    .collect()
            })
            .collect()
    })?;
    let estimates: Vec<Vec<Vec<f64>>> =
        (0..ks.len()).map(|ki| per_run.iter().map(|run| run[ki].clone()).collect()).collect();

    let mut rows = Vec::with_capacity(ks.len() * n);
    for (ki, &k) in ks.iter().enumerate() {
        let bounds = BoundInputs {
            eps,
            lips: analysis::default_lipschitz(lambda_hat),
            lambda: lambda_hat.min(1.0),
            dc: graph.max_chk_degree(),
            dv: graph.max_var_degree(),
            horizon: iterations,
        };
        let gap = analysis::message_gap_bound(&bounds, k as u64).ok();
        for i in 0..n {
            let xs: Vec<f64> = estimates[ki].iter().map(|r| r[i]).collect();
            let (mean, variance) = stats::mean_var(&xs);
            rows.push(MomentRow {
                var: i,
                k,
                mean,
                variance,
                sp_gamma: sp_result.marginals[i],
                oracle_gamma: oracle.as_ref().map(|o| o[i]),
                lambda_hat,
                variance_bound: analysis::variance_bound(lambda_hat.min(1.0), k as u64),
                message_gap_bound: gap,
            });
        }
    }
    Ok(MomentStudy { ks: ks.to_vec(), runs, iterations, lambda_hat, sp_gamma: sp_result.marginals, rows, estimates })
}

/// Moment study driven by a [`MomentConfig`].
pub fn run_moment_config(cfg: &MomentConfig, threads: Option<usize>) -> Result<(FactorGraph, MomentStudy)> {
    cfg.validate()?;
    let graph = cfg.code.build()?;
    let llh = frozen_likelihoods(&graph, cfg.ebno_db, cfg.noise_seed, cfg.nds)?;
    let iterations = match cfg.iterations {
        Some(t) => t,
        None => graph
            .analyze()
            .diameter
            .ok_or_else(|| LabError::Config("iterations must be given for graphs with cycles".into()))?
            .max(1),
    };
    let study = run_moment_study(&graph, &llh, &cfg.k, cfg.runs, iterations, cfg.eps, cfg.seed, threads)?;
    Ok((graph, study))
}

pub fn write_moment_csv(path: &Path, rows: &[MomentRow]) -> Result<()> {
    let mut w = schema_writer(path)?;
    w.write_record(MOMENT_HEADER)?;
    for r in rows {
        w.write_record([
            r.var.to_string(),
            r.k.to_string(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.sp_gamma.to_string(),
            opt(r.oracle_gamma),
            r.lambda_hat.to_string(),
            r.variance_bound.to_string(),
            opt(r.message_gap_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CodeSpec;

    fn small_cfg(frames: u64) -> ExperimentConfig {
        ExperimentConfig {
            code: CodeSpec::Gallager { n: 24, dv: 3, dc: 6, seed: 2 },
            decoders: vec![
                DecoderSpec::Sp { max_iters: 20, tol: 1e-12 },
                DecoderSpec::Mbsd { k: vec![16, 64], max_iters: 20, nds: true },
                DecoderSpec::Sd { cycles: 200, em_length: 8, nds: false, output_window: None },
            ],
            ebno_db: vec![1.0, 3.0],
            frames,
            max_frame_errors: Some(5),
            seed: 3,
            early_stop: true,
            output: None,
        }
    }

    #[test]
    fn cells_expand_every_k() {
        let c = cells(&small_cfg(1));
        let labels: Vec<&str> = c.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(
            labels,
            ["sp:t=20", "mbsd:k=16:t=20:nds=1", "mbsd:k=64:t=20:nds=1", "sd:cycles=200:em=8:w=100:nds=0"]
        );
    }

    #[test]
    fn truncation_stops_at_the_frame_error_limit() {
        let cfg = small_cfg(300);
        let g = cfg.code.build().unwrap();
        let out = run_ber_sweep(&cfg, &g, RunOptions { threads: Some(2), batch: 7 }).unwrap();
        for p in &out.points {
            assert!(p.noise_checksums.len() <= 300);
            for c in &p.cells {
                let fe = c.frame_errors();
                assert!(fe <= 5);
                if c.frames() < 300 {
                    assert_eq!(fe, 5);
                    assert!(*c.per_frame.last().unwrap() > 0);
                }
            }
        }
        for r in out.records() {
            assert_eq!(r.ber, r.bit_errors as f64 / (r.frames * 24) as f64);
            assert!((0.0..=1.0).contains(&r.fer));
        }
    }

    #[test]
    fn batch_size_and_threads_do_not_change_results() {
        let cfg = small_cfg(60);
        let g = cfg.code.build().unwrap();
        let strip = |o: SweepOutcome| {
            o.points
                .into_iter()
                .map(|p| (p.noise_checksums, p.cells.into_iter().map(|c| c.per_frame).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        let a = strip(run_ber_sweep(&cfg, &g, RunOptions { threads: Some(1), batch: 64 }).unwrap());
        let b = strip(run_ber_sweep(&cfg, &g, RunOptions { threads: Some(3), batch: 5 }).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn gap_slope_needs_two_points() {
        let mut cfg = small_cfg(20);
        cfg.decoders = vec![
            DecoderSpec::Sp { max_iters: 20, tol: 1e-12 },
            DecoderSpec::Mbsd { k: vec![16], max_iters: 20, nds: false },
        ];
        let g = cfg.code.build().unwrap();
        let out = run_ber_sweep(&cfg, &g, RunOptions::default()).unwrap();
        let (rows, slopes) = gap_study(&out).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(slopes.iter().all(|s| s.slope.is_none()));
        cfg.decoders.remove(0);
        let out = run_ber_sweep(&cfg, &g, RunOptions::default()).unwrap();
        assert!(matches!(gap_study(&out), Err(LabError::Config(_))));
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/ber.csv"), "meta.json"), PathBuf::from("out/ber.csv.meta.json"));
    }
}
