use std::path::PathBuf;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything a run depends on. It is written into every artifact, so two
/// runs with equal configs must produce equal payloads.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub p_grid: Vec<f64>,
    pub d: Option<usize>,
    pub grid_n: Option<usize>,
    pub k: Option<u32>,
    pub depth: Option<usize>,
    pub sweeps: Option<usize>,
    pub seed: u64,
    // Where a result goes does not change what it is.
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

/// Parses "a,b,c" or "lo:hi:count" (count points, both ends included).
pub fn parse_p_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| CliError::Usage(format!("p-grid {text:?}: {why}"));
    let grid: Vec<f64> = if let [lo, hi, count] = text.split(':').collect::<Vec<_>>()[..] {
        let lo: f64 = lo.trim().parse().map_err(|_| bad("bad lower end"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("bad upper end"))?;
        let count: usize = count.trim().parse().map_err(|_| bad("bad count"))?;
        if count < 2 || !(hi > lo) {
            return Err(bad("need lo < hi and at least two points"));
        }
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    } else {
        text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad("not a number"))).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|p| !(p.is_finite() && *p > 1.0)) {
        return Err(bad("exponents must be finite and > 1"));
    }
    Ok(grid)
}

/// Per-task seed derived from the root seed (splitmix64 finalizer), so rows
/// stay reproducible regardless of scheduling.
pub fn task_seed(root: u64, task: u64) -> u64 {
    let mut z = root ^ task.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
