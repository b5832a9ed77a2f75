//! Grid runner: for every (α, δ, N, replicate) one batch is drawn and fed to
//! both the δ-band and the Malliavin estimator; per-replicate results are
//! stored and then reduced to means and variances.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::estimators::{
    delta_allocation, empirical_quantiles, malliavin_allocation, AllocationEstimate, EstimatorKind,
};
use crate::models::{LossModel, Model};

/// Largest grid axis length addressable by [`derive_seed`].
pub const MAX_GRID_AXIS: usize = 255;
/// Largest replicate count addressable by [`derive_seed`].
pub const MAX_REPLICATES: u64 = (1 << 40) - 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for one replicate. The indices are packed into disjoint bit
/// fields (8, 8, 8 and 40 bits), combined with the scrambled base seed and
/// passed through the splitmix64 finalizer, which is a bijection; distinct
/// index tuples therefore never share a seed.
pub fn derive_seed(
    base_seed: u64,
    alpha_idx: usize,
    delta_idx: usize,
    n_idx: usize,
    replicate: u64,
) -> u64 {
    debug_assert!(
        alpha_idx <= MAX_GRID_AXIS && delta_idx <= MAX_GRID_AXIS && n_idx <= MAX_GRID_AXIS
    );
    debug_assert!(replicate <= MAX_REPLICATES);
    let packed = ((alpha_idx as u64) << 56)
        | ((delta_idx as u64) << 48)
        | ((n_idx as u64) << 40)
        | (replicate & MAX_REPLICATES);
    splitmix64(packed ^ splitmix64(base_seed))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: LossModel,
    pub model_tag: String,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Draws used to estimate VaR levels when no closed form exists.
    pub n_pre: usize,
    pub assets: Vec<usize>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 200 replicates, N up to 10⁵.
    pub fn new(model: LossModel) -> Self {
        let assets = (0..model.dim()).collect();
        Self {
            model_tag: model.tag(),
            model,
            alphas: vec![0.5, 0.9, 0.99],
            deltas: vec![1e-3, 1e-4, 1e-5, 1e-6],
            sample_sizes: vec![10_000, 31_622, 100_000],
            replicates: 200,
            base_seed: 20_240_601,
            n_pre: 1_000_000,
            assets,
        }
    }

    /// The full grid: α ∈ {0.5, 0.9, 0.99}, δ ∈ {10⁻³..10⁻⁶},
    /// N ∈ {10⁴, ⌊10^4.5⌋, 10⁵, ⌊10^5.5⌋, 10⁶}.
    pub fn with_paper_grid(mut self) -> Self {
        self.alphas = vec![0.5, 0.9, 0.99];
        self.deltas = vec![1e-3, 1e-4, 1e-5, 1e-6];
        self.sample_sizes = vec![10_000, 31_622, 100_000, 316_227, 1_000_000];
        self
    }

    /// Rejects invalid settings; returns warnings for suspicious ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (name, len) in [
            ("alphas", self.alphas.len()),
            ("deltas", self.deltas.len()),
            ("sample_sizes", self.sample_sizes.len()),
        ] {
            if len == 0 {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
            if len > MAX_GRID_AXIS {
                return Err(Error::Config(format!(
                    "{name} has more than {MAX_GRID_AXIS} entries"
                )));
            }
        }
        if self.replicates == 0 || self.replicates as u64 > MAX_REPLICATES {
            return Err(Error::Config(format!(
                "replicates must be in 1..={MAX_REPLICATES}"
            )));
        }
        if self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be >= 1".into()));
        }
        let needs_pre = self.model.as_gaussian().is_none();
        if needs_pre && self.n_pre == 0 {
            return Err(Error::Config("n_pre must be >= 1".into()));
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d.is_finite()) {
                return Err(domain("delta", d, "(0, inf)"));
            }
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(domain("alpha", a, "(0, 1)"));
            }
            for &d in &self.deltas {
                if a - d <= 0.0 || a + d >= 1.0 {
                    return Err(Error::Config(format!(
                        "band alpha ± delta = {a} ± {d} leaves (0, 1)"
                    )));
                }
            }
        }
        if let Some(&bad) = self.assets.iter().find(|&&a| a >= self.model.dim()) {
            return Err(Error::Config(format!(
                "asset index {bad} out of range for d = {}",
                self.model.dim()
            )));
        }
        let min_tail = self
            .alphas
            .iter()
            .map(|a| 1.0 - a)
            .fold(f64::INFINITY, f64::min);
        let max_delta = self.deltas.iter().copied().fold(0.0, f64::max);
        if min_tail < 2.0 * max_delta {
            warnings.push(format!(
                "min(1 - alpha) = {min_tail} is below 2 * max(delta) = {}",
                2.0 * max_delta
            ));
        }
        Ok(warnings)
    }
}

/// VaR levels for one α: at α and, per δ, at α − δ and α + δ.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLevels {
    pub alpha: f64,
    pub var: f64,
    /// (VaR_{α−δ}, VaR_{α+δ}) in the order of the configured deltas.
    pub bands: Vec<(f64, f64)>,
}

/// VaR levels from the closed form when the model has one, else from a
/// single pre-run of `n_pre` draws on its own stream.
pub fn var_table(cfg: &ExperimentConfig) -> Result<Vec<VarLevels>> {
    let mut levels = Vec::new();
    for &a in &cfg.alphas {
        levels.push(a);
        for &d in &cfg.deltas {
            levels.push(a - d);
            levels.push(a + d);
        }
    }
    let values = match cfg.model.as_gaussian() {
        Some(g) => levels
            .iter()
            .map(|&a| g.closed_form(a).map(|c| c.var))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let seed = derive_seed(
                cfg.base_seed,
                MAX_GRID_AXIS,
                MAX_GRID_AXIS,
                MAX_GRID_AXIS,
                MAX_REPLICATES,
            );
            let batch = cfg.model.sample(cfg.n_pre, &mut rng_for(seed))?;
            empirical_quantiles(batch.totals(), &levels)?
        }
    };
    let per_alpha = 1 + 2 * cfg.deltas.len();
    Ok(cfg
        .alphas
        .iter()
        .zip(values.chunks_exact(per_alpha))
        .map(|(&alpha, v)| VarLevels {
            alpha,
            var: v[0],
            bands: v[1..].chunks_exact(2).map(|p| (p[0], p[1])).collect(),
        })
        .collect())
}

/// Everything computed for one (α, δ, N, replicate) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub alpha_idx: usize,
    pub delta_idx: usize,
    pub n_idx: usize,
    pub replicate: usize,
    pub seed: u64,
    /// Checksum of the batch both estimators consumed.
    pub checksum: u64,
    /// N*_α: draws with X ≥ VaR_α.
    pub tail_count: usize,
    /// N*_{α,δ}: draws with X in [VaR_{α−δ}, VaR_{α+δ}].
    pub band_count: usize,
    pub delta: Vec<AllocationEstimate>,
    pub malliavin: Vec<AllocationEstimate>,
    /// Set when the replicate could not be evaluated at all.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model_tag: String,
    pub alpha: f64,
    pub delta: f64,
    pub sample_size: usize,
    pub asset: usize,
    pub estimator: EstimatorKind,
    /// NaN when no replicate produced a defined estimate.
    pub mean: f64,
    pub variance: f64,
    pub undefined: usize,
    /// Tail draws dropped for weight failures, summed over replicates.
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub rows: Vec<ResultRow>,
    pub records: Vec<ReplicateRecord>,
    pub var_levels: Vec<VarLevels>,
    pub warnings: Vec<String>,
}

impl GridRun {
    /// Rows that had at least one degenerate (constant) weight vector.
    pub fn degenerate_weight_count(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| &r.malliavin)
            .filter(|e| e.degenerate_weight)
            .count()
    }
}

fn run_replicate(
    cfg: &ExperimentConfig,
    levels: &[VarLevels],
    (ai, di, ni, rep): (usize, usize, usize, usize),
) -> ReplicateRecord {
    let seed = derive_seed(cfg.base_seed, ai, di, ni, rep as u64);
    let mut record = ReplicateRecord {
        alpha_idx: ai,
        delta_idx: di,
        n_idx: ni,
        replicate: rep,
        seed,
        checksum: 0,
        tail_count: 0,
        band_count: 0,
        delta: Vec::new(),
        malliavin: Vec::new(),
        failure: None,
    };
    let lv = &levels[ai];
    let (lo, hi) = lv.bands[di];
    let batch = match cfg.model.sample(cfg.sample_sizes[ni], &mut rng_for(seed)) {
        Ok(b) => b,
        Err(e) => {
            record.failure = Some(e.to_string());
            return record;
        }
    };
    record.checksum = batch.checksum();
    record.tail_count = batch.totals().iter().filter(|&&x| x >= lv.var).count();
    record.band_count = batch
        .totals()
        .iter()
        .filter(|&&x| x >= lo && x <= hi)
        .count();
    for &i in &cfg.assets {
        let both = delta_allocation(&batch, i, lo, hi)
            .and_then(|d| malliavin_allocation(&batch, &cfg.model, i, lv.var).map(|m| (d, m)));
        match both {
            Ok((d, m)) => {
                record.delta.push(d);
                record.malliavin.push(m);
            }
            Err(e) => {
                record.failure = Some(e.to_string());
                record.delta.clear();
                record.malliavin.clear();
                break;
            }
        }
    }
    record
}

/// Mean and variance (n − 1 denominator; 0 for a single value, NaN for none).
pub fn moments(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        n => {
            let nf = n as f64;
            let mean = values.iter().sum::<f64>() / nf;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
            (mean, var)
        }
    }
}

fn aggregate(cfg: &ExperimentConfig, records: &[ReplicateRecord]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let cells = cfg.alphas.len() * cfg.deltas.len() * cfg.sample_sizes.len();
    for cell in 0..cells {
        let reps = &records[cell * cfg.replicates..(cell + 1) * cfg.replicates];
        let first = &reps[0];
        for (slot, &asset) in cfg.assets.iter().enumerate() {
            for kind in [EstimatorKind::Delta, EstimatorKind::Malliavin] {
                let mut values = Vec::with_capacity(reps.len());
                let mut excluded = 0;
                for r in reps {
                    let list = match kind {
                        EstimatorKind::Delta => &r.delta,
                        _ => &r.malliavin,
                    };
                    if let Some(e) = list.get(slot) {
                        excluded += e.excluded;
                        if let Some(v) = e.value {
                            values.push(v);
                        }
                    }
                }
                let (mean, variance) = moments(&values);
                rows.push(ResultRow {
                    model_tag: cfg.model_tag.clone(),
                    alpha: cfg.alphas[first.alpha_idx],
                    delta: cfg.deltas[first.delta_idx],
                    sample_size: cfg.sample_sizes[first.n_idx],
                    asset,
                    estimator: kind,
                    mean,
                    variance,
                    undefined: reps.len() - values.len(),
                    excluded,
                });
            }
        }
    }
    rows
}

/// Runs the whole grid and keeps the per-replicate records.
pub fn run_grid_detailed(cfg: &ExperimentConfig) -> Result<GridRun> {
    let warnings = cfg.validate()?;
    let var_levels = var_table(cfg)?;
    let mut tasks = Vec::new();
    for ai in 0..cfg.alphas.len() {
        for di in 0..cfg.deltas.len() {
            for ni in 0..cfg.sample_sizes.len() {
                for rep in 0..cfg.replicates {
                    tasks.push((ai, di, ni, rep));
                }
            }
        }
    }
    let records: Vec<ReplicateRecord> = tasks
        .into_par_iter()
        .map(|t| run_replicate(cfg, &var_levels, t))
        .collect();
    let rows = aggregate(cfg, &records);
    Ok(GridRun {
        rows,
        records,
        var_levels,
        warnings,
    })
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_grid_detailed(cfg)?.rows)
}

pub const CSV_HEADER: &str = "model,alpha,delta,N,asset,estimator,mean,variance,undefined,excluded";

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Rows as CSV text; asset indices are 1-based.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.model_tag,
            fmt_float(r.alpha),
            fmt_float(r.delta),
            r.sample_size,
            r.asset + 1,
            r.estimator,
            fmt_float(r.mean),
            fmt_float(r.variance),
            r.undefined,
            r.excluded
        );
    }
    out
}

/// Writes to a temporary file in the target directory, then renames it into
/// place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    write_atomic(path.as_ref(), to_csv(rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MarginalDistribution;
    use crate::models::IndependentModel;

    fn lognormal() -> LossModel {
        let m = [0.5, 1.0, 2.0].map(|s| MarginalDistribution::log_normal(0.0, s).unwrap());
        LossModel::Independent(IndependentModel::new(m.to_vec()).unwrap())
    }

    fn small(model: LossModel) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(model);
        cfg.alphas = vec![0.9];
        cfg.deltas = vec![1e-2];
        cfg.sample_sizes = vec![100];
        cfg.replicates = 1;
        cfg.n_pre = 10_000;
        cfg
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_seed(7, 1, 2, 3, 4), derive_seed(7, 1, 2, 3, 4));
        assert_ne!(derive_seed(7, 1, 2, 3, 4), derive_seed(7, 1, 2, 3, 5));
        assert_ne!(derive_seed(7, 1, 2, 3, 4), derive_seed(8, 1, 2, 3, 4));
        assert_ne!(derive_seed(7, 0, 0, 1, 0), derive_seed(7, 0, 1, 0, 0));
    }

    #[test]
    fn single_replicate_has_zero_variance() {
        let rows = run_grid(&small(lognormal())).unwrap();
        assert_eq!(rows.len(), 3 * 2);
        for r in &rows {
            assert!(r.undefined > 0 || r.variance == 0.0);
        }
    }

    #[test]
    fn moments_convention() {
        assert_eq!(moments(&[2.0]), (2.0, 0.0));
        assert_eq!(moments(&[1.0, 3.0]), (2.0, 2.0));
        assert!(moments(&[]).0.is_nan());
    }

    #[test]
    fn validation() {
        let mut cfg = small(lognormal());
        assert!(cfg.validate().unwrap().is_empty());
        cfg.deltas = vec![0.06];
        assert_eq!(cfg.validate().unwrap().len(), 1);
        cfg.deltas = vec![0.2];
        assert!(cfg.validate().is_err());
        cfg.deltas = vec![1e-3];
        cfg.assets = vec![3];
        assert!(cfg.validate().is_err());
        cfg.assets = vec![0];
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ResultRow {
            model_tag: "m".into(),
            alpha: 0.99,
            delta: 1e-5,
            sample_size: 10,
            asset: 0,
            estimator: EstimatorKind::Malliavin,
            mean: 1.5,
            variance: f64::NAN,
            undefined: 1,
            excluded: 0,
        }];
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("m,9.8999999999999999e-1,1.0000000000000001e-5,10,1,malliavin,1.5000000000000000e0,NaN,1,0")
        );
    }
}
