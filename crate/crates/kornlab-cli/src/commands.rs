use std::path::{Path, PathBuf};

use kornlab::burkholder::{bellman_iterate, laminate_lower_bound, search_pairs, BellmanOptions};
use kornlab::matalg::{skew_defect_operator, tracefree_defect_constant};
use kornlab::orlicz::{default_grid, orlicz_korn_constant, YoungFunction};
use kornlab::radial::{centered_abs_moment, fk_upper_and_rate, jensen_lower, GammaSpec};
use kornlab::rankone::{c_of_p, full_gradient_bounds, natural_bound, p_zero, planar_envelope, EnvelopeOptions};
use kornlab::spectral::{korn_identity_residual, korn_ratio, korn_upper_bound, random_band_limited, GridSpec, Variant};
use kornlab::special::p_star;
use kornlab::witness::{sampled_vortex_ratio, witness_bracket, witness_norms_closed_form};

use crate::config::{task_seed, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{write_text, Cell, Table};

/// Row of the Riesz and Korn bound table at one exponent.
pub fn bounds_row(p: f64) -> Result<Vec<f64>> {
    let q = p_star(p) - 1.0;
    let (full_lower, full_upper) = full_gradient_bounds(p)?;
    Ok(vec![p, 1f64.max(q / 2.0), q, korn_upper_bound(p), q, full_lower, full_upper])
}

pub fn bounds(config: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["p", "lower", "riesz_upper", "korn_upper", "korn_lower", "full_lower", "full_upper"]);
    for &p in &config.p_grid {
        t.push(bounds_row(p)?.into_iter().map(Cell::from).collect());
    }
    Ok(t)
}

/// `points` interior points of (p₀, 2) plus both endpoints.
pub fn improvement_grid(points: usize) -> Vec<f64> {
    let p0 = p_zero();
    (0..=points + 1).map(|i| p0 + (2.0 - p0) * i as f64 / (points + 1) as f64).collect()
}

pub fn improvement_table() -> Result<Table> {
    let mut t = Table::new(&["p", "c", "natural_bound", "improvement"]);
    t.note("p0", p_zero());
    for p in improvement_grid(200) {
        let c = c_of_p(p)?;
        let nat = natural_bound(p);
        t.push(vec![p.into(), c.into(), nat.into(), (c - nat).into()]);
    }
    Ok(t)
}

pub fn riesz_figure_table(grid: &[f64]) -> Table {
    let mut t = Table::new(&["p", "lower", "upper"]);
    for &p in grid {
        let q = p_star(p) - 1.0;
        t.push(vec![p.into(), 1f64.max(q / 2.0).into(), q.into()]);
    }
    t
}

/// File names written by `figures`.
pub const FIGURE_FILES: [&str; 2] = ["riesz_bounds.csv", "improvement.csv"];

pub fn figures(config: &RunConfig) -> Result<Table> {
    let dir = config.output_path.clone().unwrap_or_else(|| PathBuf::from("figures"));
    let tables = [riesz_figure_table(&config.p_grid), improvement_table()?];
    let mut index = Table::new(&["file", "rows"]);
    for (name, table) in FIGURE_FILES.iter().zip(&tables) {
        // Figures are always CSV, whatever the report format.
        let mut cfg = config.clone();
        cfg.format = crate::config::Format::Csv;
        write_text(&dir.join(name), &table.render(&cfg))?;
        index.push(vec![(*name).into(), table.rows.len().into()]);
    }
    Ok(index)
}

const DEFAULT_KS: [u32; 8] = [1, 2, 3, 5, 10, 20, 50, 100];

fn k_list(config: &RunConfig) -> Vec<u32> {
    config.k.map_or_else(|| DEFAULT_KS.to_vec(), |k| vec![k])
}

pub fn witness(config: &RunConfig) -> Result<Table> {
    let mut cols = vec!["k", "p", "f_k", "bracket_lower", "bracket_upper", "ln_norm_e", "ln_norm_a"];
    if config.grid_n.is_some() {
        cols.push("spectral_ratio");
    }
    let mut t = Table::new(&cols);
    for k in k_list(config) {
        for &p in &config.p_grid {
            let w = witness_norms_closed_form(k, p)?;
            let (lo, hi) = witness_bracket(k, p);
            let mut row: Vec<Cell> =
                vec![k.into(), p.into(), w.ratio.into(), lo.into(), hi.into(), w.ln_norm_e.into(), w.ln_norm_a.into()];
            if let Some(n) = config.grid_n {
                row.push(sampled_vortex_ratio(k, p, n)?.into());
            }
            t.push(row);
        }
    }
    Ok(t)
}

pub fn spectral_check(config: &RunConfig) -> Result<Table> {
    let d = config.d.unwrap_or(2);
    let n = config.grid_n.unwrap_or(32);
    let grid = GridSpec::new(d, n)?;
    let mut t = Table::new(&[
        "field",
        "p",
        "ratio",
        "trace_free_ratio",
        "upper_bound",
        "identity_residual",
        "trace_free_residual",
    ]);
    for field in 0..5u64 {
        let u = random_band_limited(grid, (n / 4).max(1), task_seed(config.seed, field))?;
        let plain = korn_identity_residual(&u, Variant::Plain)?;
        let free = korn_identity_residual(&u, Variant::TraceFree)?;
        for &p in &config.p_grid {
            t.push(vec![
                (field as usize).into(),
                p.into(),
                korn_ratio(&u, p, Variant::Plain)?.into(),
                korn_ratio(&u, p, Variant::TraceFree)?.into(),
                korn_upper_bound(p).into(),
                plain.into(),
                free.into(),
            ]);
        }
    }
    Ok(t)
}

fn single_p(config: &RunConfig) -> f64 {
    config.p_grid[0]
}

pub fn bellman(config: &RunConfig) -> Result<Table> {
    let p = single_p(config);
    let cells = config.grid_n.unwrap_or(64);
    let sweeps = config.sweeps.unwrap_or(100);
    let table = bellman_iterate(p, BellmanOptions::new(cells, sweeps))?;
    let (lo, hi) = table.gap_range();
    let mut t = Table::new(&["x", "y", "B", "G", "gap"]);
    t.note("sweeps", sweeps);
    t.note("gap_min", lo);
    t.note("gap_max", hi);
    t.note("last_increment", table.increments.last().copied().unwrap_or(0.0));
    for i in 0..=cells {
        for j in 0..=cells {
            let (x, y) = (table.coordinate(i), table.coordinate(j));
            let b = table.value(i, j);
            let g = kornlab::burkholder::eval_g(&kornlab::burkholder::BurkholderState::new(p, x, y)?);
            t.push(vec![x.into(), y.into(), b.into(), g.into(), (b - g).into()]);
        }
    }
    let depth = config.depth.unwrap_or(12);
    let best = search_pairs(p, depth, 200, task_seed(config.seed, 0))?;
    let lam = laminate_lower_bound(p, 2, &best.strategy.build(depth)?)?;
    t.note("tree_depth", depth);
    t.note("tree_ratio", best.ratio);
    t.note("tree_witnessed_c", lam.witnessed_c);
    Ok(t)
}

pub fn envelope(config: &RunConfig) -> Result<Table> {
    let p = single_p(config);
    let c = p_star(p) - 1.0;
    let mut opts = EnvelopeOptions::new(config.grid_n.unwrap_or(64), config.sweeps.unwrap_or(200));
    opts.report_fraction = 0.5;
    let env = planar_envelope(p, c, opts)?;
    let mut t = Table::new(&["a", "b", "f", "envelope", "G_p", "gap"]);
    t.note("c", c);
    t.note("relative_gap", env.relative_gap_to_burkholder());
    t.note("zone_gap", env.gap_on_nonnegative_zone());
    for r in env.rows() {
        t.push(vec![r.a.into(), r.b.into(), r.f.into(), r.envelope.into(), r.g.into(), (r.envelope - r.g).into()]);
    }
    Ok(t)
}

pub fn radial(config: &RunConfig) -> Result<Table> {
    let ks: Vec<u32> = config.k.map_or_else(|| vec![1, 2, 5, 10, 20, 50, 100, 200], |k| vec![k]);
    let mut t = Table::new(&["p", "k", "jensen", "exact", "upper"]);
    for &p in &config.p_grid {
        if p < 2.0 {
            return Err(CliError::Usage(format!("radial needs p >= 2, got {p}")));
        }
        for &k in &ks {
            let spec = GammaSpec::new(p, k)?;
            let exact = centered_abs_moment(&spec)?.value;
            t.push(vec![p.into(), k.into(), jensen_lower(&spec).into(), exact.into(), (p - 1.0).powf(p).into()]);
        }
        if let Some(beta) = fk_upper_and_rate(p, &ks)?.beta {
            t.note(&format!("rate_exponent_p{p}"), beta);
        }
    }
    Ok(t)
}

#[derive(Clone, Debug)]
pub enum Family {
    Power,
    Mixed { lambda: f64 },
    TLog,
    Table(PathBuf),
}

fn load_table(path: &Path) -> Result<YoungFunction> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(YoungFunction::parse_table(&text)?)
}

pub fn orlicz(config: &RunConfig, family: &Family) -> Result<Table> {
    let mut t = Table::new(&["family", "p", "lower", "upper", "K", "constant", "simplified", "resolution"]);
    let cases: Vec<(&str, f64, YoungFunction, Option<Vec<f64>>)> = match family {
        Family::Power => config
            .p_grid
            .iter()
            .map(|&p| Ok(("power", p, YoungFunction::power(p)?, None)))
            .collect::<Result<_>>()?,
        Family::Mixed { lambda } => config
            .p_grid
            .iter()
            .map(|&p| Ok(("mixed", p, YoungFunction::mixed(*lambda, p)?, None)))
            .collect::<Result<_>>()?,
        Family::TLog => vec![("tlog", f64::NAN, YoungFunction::t_log(), None)],
        Family::Table(path) => {
            let phi = load_table(path)?;
            let grid = phi.table_points();
            vec![("table", f64::NAN, phi, grid)]
        }
    };
    for (name, p, phi, grid) in cases {
        let grid = grid.unwrap_or_else(default_grid);
        let c = orlicz_korn_constant(&phi, &grid)?;
        t.push(vec![
            name.into(),
            p.into(),
            c.indices.lower.into(),
            c.indices.upper.into(),
            c.k.into(),
            c.constant.into(),
            c.simplified.unwrap_or(f64::NAN).into(),
            c.indices.resolution.into(),
        ]);
    }
    Ok(t)
}

pub fn tensor_constants(config: &RunConfig) -> Result<Table> {
    let dims: Vec<usize> = config.d.map_or_else(|| (2..=6).collect(), |d| vec![d]);
    let mut t = Table::new(&["d", "min_eigenvalue", "sharp_constant", "operator_residual", "trace_free_constant"]);
    for d in dims {
        let op = skew_defect_operator(d)?;
        let tf = tracefree_defect_constant(d)?;
        t.push(vec![
            d.into(),
            op.min_eigenvalue.into(),
            op.sharp_constant.into(),
            op.quadratic_residual().into(),
            tf.constant.into(),
        ]);
    }
    Ok(t)
}
