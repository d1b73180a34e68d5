//! The subcommands. Each returns a [`RunReport`] of tables and checks.

use bergeo::analysis::{
    harnack_differential_check, harnack_global_check, harnack_samples, random_bumps, sobolev_bound_check,
    spacing_check, spectral_distribution, variance_check,
};
use bergeo::bergman::{gram_matrix, lambda_bounds_report, spectral_pair, BergmanGeodesic};
use bergeo::hmae::ma_mass_report;
use bergeo::oracle::{convergence_study, exact_geodesic};
use bergeo::path::{GridSpec, PathGrid};
use bergeo::potential::{sigmoid, PotentialSpec, RadialPotential};
use bergeo::quadrature::{build_quadrature, QuadratureRule};
use bergeo::{hmae, Exec};

use crate::config::{Config, Pair};
use crate::report::{grid_tag, num, quad_tag, Check, RunReport, Table};
use crate::{acceptance, CliError, Command};

/// Shared state of one run.
pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub exec: Exec,
    pub quad: QuadratureRule,
    pub grid: GridSpec,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a Config, exec: Exec) -> Result<Self, CliError> {
        Ok(Self {
            cfg,
            exec,
            quad: build_quadrature(cfg.grid.quadrature_nodes)?,
            grid: cfg.grid.spec(),
        })
    }

    pub fn pairs(&self) -> Result<Vec<(&'a Pair, RadialPotential, RadialPotential)>, CliError> {
        self.cfg
            .pairs
            .iter()
            .map(|p| {
                let (a, b) = p.potentials()?;
                Ok((p, a, b))
            })
            .collect()
    }

    /// Bergman geodesics of a pair for every level in `k_list`.
    pub fn geodesics(&self, a: &RadialPotential, b: &RadialPotential, k_list: &[usize]) -> Result<Vec<BergmanGeodesic>, CliError> {
        self.exec
            .map_slice(k_list, |&k| BergmanGeodesic::from_pair(a, b, k, &self.quad))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::from)
    }
}

/// `Some(c)` for a Fubini–Study to dilation pair.
pub fn dilation_shift(p: &Pair) -> Option<f64> {
    match (&p.start, &p.end) {
        (PotentialSpec::Fs, PotentialSpec::Dilation { c }) => Some(*c),
        _ => None,
    }
}

/// A Fubini–Study to bump pair.
pub fn is_bump_pair(p: &Pair) -> bool {
    matches!((&p.start, &p.end), (PotentialSpec::Fs, PotentialSpec::Bump { .. }))
}

pub fn dispatch(cmd: Command, cfg: &Config, exec: Exec) -> Result<RunReport, CliError> {
    let ctx = Ctx::new(cfg, exec)?;
    match cmd {
        Command::Spectrum => spectrum(&ctx),
        Command::Geodesic => geodesic(&ctx),
        Command::Mass => mass(&ctx),
        Command::Converge => converge(&ctx),
        Command::Stats => stats(&ctx),
        Command::Suite => suite(&ctx),
    }
}

/// Residual ceiling for the simultaneous diagonalization.
pub const DIAGONALIZATION_TOL: f64 = 1e-8;

pub fn spectrum(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("spectrum");
    let mut table = Table::new(
        "spectrum",
        &[
            "pair",
            "k",
            "lambda_min",
            "lambda_max",
            "max_spacing",
            "max_abs_over_k",
            "top_in_interval",
            "bottom_in_interval",
            "top_in_interval_flipped",
            "bottom_in_interval_flipped",
            "residual_g0",
            "residual_g1",
        ],
    );
    let tag = quad_tag(ctx.quad.len());
    let mut worst = 0.0f64;
    for (pair, a, b) in ctx.pairs()? {
        let rows = ctx
            .exec
            .map_slice(&ctx.cfg.k_list, |&k| -> bergeo::Result<_> {
                let g0 = gram_matrix(&a, k, &ctx.quad)?;
                let g1 = gram_matrix(&b, k, &ctx.quad)?;
                let sp = spectral_pair(&g0, &g1, k)?;
                let res = sp.diagonalization_residuals(&g0, &g1);
                Ok((lambda_bounds_report(&sp, &a, &b), spacing_check(&sp), res))
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        for (lb, spacing, (r0, r1)) in rows {
            worst = worst.max(r0).max(r1);
            table.push(
                "spectral_pair",
                &tag,
                vec![
                    pair.name.clone(),
                    lb.k.to_string(),
                    num(lb.lambda_min),
                    num(lb.lambda_max),
                    num(spacing),
                    num(lb.max_abs_over_k),
                    lb.top_in_interval.to_string(),
                    lb.bottom_in_interval.to_string(),
                    lb.top_in_interval_flipped.to_string(),
                    lb.bottom_in_interval_flipped.to_string(),
                    num(r0),
                    num(r1),
                ],
            );
        }
    }
    report.checks.push(Check::new(
        "diagonalization_residual",
        worst <= DIAGONALIZATION_TOL,
        worst,
        DIAGONALIZATION_TOL,
        "max over pairs and levels",
    ));
    report.tables.push(table);
    Ok(report)
}

pub fn geodesic(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("geodesic");
    let mut table = Table::new("geodesic", &["pair", "source", "k", "t", "x", "value"]);
    let tag = grid_tag(&ctx.grid);
    let g = ctx.grid;
    for (pair, a, b) in ctx.pairs()? {
        for bg in ctx.geodesics(&a, &b, &ctx.cfg.k_list)? {
            let path = PathGrid::sample_with(&bg, g, ctx.exec)?;
            for i in 0..g.t_nodes {
                for j in 0..g.x_nodes {
                    let x = g.x(j);
                    table.push(
                        "geodesic_eval",
                        &tag,
                        vec![
                            pair.name.clone(),
                            "bergman".into(),
                            bg.k().to_string(),
                            num(g.t(i)),
                            num(x),
                            num(path.jet(i, j).psi - a.psi(x)),
                        ],
                    );
                }
            }
        }
        let oracle = exact_geodesic(&a, &b, g, ctx.exec)?;
        for i in 0..g.t_nodes {
            for j in 0..g.x_nodes {
                let x = g.x(j);
                table.push(
                    "exact_geodesic",
                    &tag,
                    vec![
                        pair.name.clone(),
                        "oracle".into(),
                        String::new(),
                        num(g.t(i)),
                        num(x),
                        num(oracle.grid.jet(i, j).psi - a.psi(x)),
                    ],
                );
            }
        }
    }
    report.notes.push(format!(
        "{} rows: (|k_list| + 1) x {} x {} per pair; values relative to the start metric",
        table.rows.len(),
        g.t_nodes,
        g.x_nodes
    ));
    report.tables.push(table);
    Ok(report)
}

pub fn mass(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("mass");
    let tag = grid_tag(&ctx.grid);
    let mut table = Table::new("mass", &["pair", "k", "boundary", "bulk", "relative_gap", "k_times_mass"]);
    let mut summary = Table::new("mass_summary", &["pair", "slope", "scaled_max", "scaled_min"]);
    let tol = &ctx.cfg.tolerances;
    for (pair, a, b) in ctx.pairs()? {
        let mut masses = Vec::new();
        for bg in ctx.geodesics(&a, &b, &ctx.cfg.k_list)? {
            let r = ma_mass_report(&bg, ctx.grid, &ctx.quad, ctx.exec)?;
            masses.push(r.boundary_value);
            table.push(
                "ma_mass_report",
                &tag,
                vec![
                    pair.name.clone(),
                    r.k.to_string(),
                    num(r.boundary_value),
                    num(r.bulk_value),
                    num(r.relative_gap()),
                    num(r.k as f64 * r.boundary_value),
                ],
            );
        }
        let scaled: Vec<f64> = ctx.cfg.k_list.iter().zip(&masses).map(|(&k, m)| k as f64 * m).collect();
        let slope = hmae::loglog_slope(&ctx.cfg.k_list, &masses);
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        summary.push(
            "ma_mass_decay_study",
            &quad_tag(ctx.quad.len()),
            vec![pair.name.clone(), num(slope), num(hi), num(lo)],
        );
        if dilation_shift(pair).is_some() {
            let m = masses.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            report.checks.push(Check::new(
                format!("{}: mass vanishes", pair.name),
                m <= tol.closed_form,
                m,
                tol.closed_form,
                "the dilation path is an exact geodesic",
            ));
        }
        if is_bump_pair(pair) && masses.len() > 1 {
            let [lo_s, hi_s] = ctx.cfg.mass.slope_window;
            report.checks.push(Check::new(
                format!("{}: log-log slope", pair.name),
                (lo_s..=hi_s).contains(&slope),
                slope,
                hi_s,
                format!("window [{lo_s}, {hi_s}]"),
            ));
        }
    }
    report.tables.push(table);
    report.tables.push(summary);
    Ok(report)
}

/// Levels `l` whose envelopes are compared: all but the largest `k`.
pub fn envelope_levels(k_list: &[usize]) -> Vec<usize> {
    if k_list.len() > 1 {
        k_list[..k_list.len() - 1].to_vec()
    } else {
        k_list.to_vec()
    }
}

pub fn converge(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("converge");
    let tag = grid_tag(&ctx.grid);
    let mut table = Table::new("converge", &["pair", "kind", "n", "error"]);
    let mut summary = Table::new(
        "converge_summary",
        &["pair", "level_slope", "envelope_slope", "envelope_nonincreasing"],
    );
    let levels = envelope_levels(&ctx.cfg.k_list);
    for (pair, a, b) in ctx.pairs()? {
        let oracle = exact_geodesic(&a, &b, ctx.grid, ctx.exec)?;
        let r = convergence_study(&oracle, &a, &b, &ctx.cfg.k_list, &levels, &ctx.quad, ctx.exec)?;
        for (k, e) in r.k.iter().zip(&r.level_errors) {
            table.push(
                "convergence_study",
                &tag,
                vec![pair.name.clone(), "level".into(), k.to_string(), num(*e)],
            );
        }
        for (l, e) in r.l.iter().zip(&r.envelope_errors) {
            table.push(
                "convergence_study",
                &tag,
                vec![pair.name.clone(), "envelope".into(), l.to_string(), num(*e)],
            );
        }
        summary.push(
            "convergence_study",
            &tag,
            vec![
                pair.name.clone(),
                num(r.level_slope),
                num(r.envelope_slope),
                r.envelope_nonincreasing.to_string(),
            ],
        );
        report.checks.push(Check::new(
            format!("{}: envelope errors nonincreasing", pair.name),
            r.envelope_nonincreasing,
            r.envelope_errors.last().copied().unwrap_or(f64::NAN),
            r.envelope_errors.first().copied().unwrap_or(f64::NAN),
            "last vs first envelope error",
        ));
        if dilation_shift(pair).is_some() {
            // the Bergman path differs from the exact one by a constant
            let dev = r
                .l
                .iter()
                .zip(&r.envelope_errors)
                .map(|(&l, e)| (e - ((l as f64 + 1.0) / l as f64).ln() / l as f64).abs())
                .fold(0.0, f64::max);
            report.checks.push(Check::new(
                format!("{}: envelope closed form", pair.name),
                dev <= ctx.cfg.tolerances.envelope_dilation,
                dev,
                ctx.cfg.tolerances.envelope_dilation,
                "|E_l - log((l+1)/l)/l|",
            ));
        }
    }
    report.tables.push(table);
    report.tables.push(summary);
    Ok(report)
}

pub fn stats(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("stats");
    let tol = ctx.cfg.tolerances;
    let tag = grid_tag(&ctx.grid);
    let mut variance = Table::new("variance", &["pair", "k", "identity_error", "fd_error", "sup_accel"]);
    let mut spacing = Table::new("spacing", &["pair", "k", "max_spacing"]);
    let mut binomial = Table::new("binomial", &["pair", "k", "max_deviation"]);
    let mut defect = Table::new("harnack_defect", &["pair", "k", "min_defect", "min_residual"]);
    let mut samples = Table::new(
        "harnack_samples",
        &["pair", "k", "tau", "xi", "t_end", "x_end", "lhs", "rhs", "delta", "margin_8", "margin_4", "margin_1"],
    );
    let mut sobolev = Table::new("sobolev", &["potential", "dirichlet", "aubin_yau", "sup_norm", "slack"]);
    let h = ctx.cfg.harnack;
    let draws = harnack_samples(h.samples, ctx.cfg.seed, h.x_range, &ctx.grid);
    if h.samples == 0 {
        report.notes.push("harnack global check skipped: zero samples configured".into());
    }
    let mut sob_rows: Vec<(String, RadialPotential)> = Vec::new();
    for (pair, a, b) in ctx.pairs()? {
        sob_rows.push((format!("{}.start", pair.name), a.clone()));
        sob_rows.push((format!("{}.end", pair.name), b.clone()));
        let mut id = 0.0f64;
        let mut fd = 0.0f64;
        let mut sup = 0.0f64;
        let mut min_def = f64::INFINITY;
        for bg in ctx.geodesics(&a, &b, &ctx.cfg.k_list)? {
            let k = bg.k();
            let v = variance_check(&bg, ctx.grid, ctx.exec)?;
            id = id.max(v.identity_error);
            fd = fd.max(v.finite_difference_error);
            sup = sup.max(v.sup_accel);
            variance.push(
                "variance_check",
                &tag,
                vec![
                    pair.name.clone(),
                    k.to_string(),
                    num(v.identity_error),
                    num(v.finite_difference_error),
                    num(v.sup_accel),
                ],
            );
            spacing.push(
                "spacing_check",
                &quad_tag(ctx.quad.len()),
                vec![pair.name.clone(), k.to_string(), num(spacing_check(bg.spectral()))],
            );
            let d = harnack_differential_check(&bg, ctx.grid, ctx.exec)?;
            min_def = min_def.min(d.min_defect);
            defect.push(
                "harnack_differential_check",
                &tag,
                vec![pair.name.clone(), k.to_string(), num(d.min_defect), num(d.min_residual)],
            );
            if dilation_shift(pair).is_some() && k <= 64 {
                let dev = ctx
                    .grid
                    .x_values()
                    .iter()
                    .filter(|x| x.abs() <= 20.0)
                    .map(|&x| spectral_distribution(&bg, 0.0, x).binomial_deviation(sigmoid(x), sigmoid(-x)))
                    .fold(0.0f64, f64::max);
                binomial.push("spectral_distribution", &tag, vec![pair.name.clone(), k.to_string(), num(dev)]);
                report.checks.push(Check::new(
                    format!("{}: binomial law k={k}", pair.name),
                    dev <= tol.binomial,
                    dev,
                    tol.binomial,
                    "t = 0, |x| <= 20",
                ));
            }
        }
        report.checks.push(Check::new(
            format!("{}: accel = (4/k) Var Z", pair.name),
            id <= tol.variance_identity,
            id,
            tol.variance_identity,
            "relative",
        ));
        report.checks.push(Check::new(
            format!("{}: accel vs second differences", pair.name),
            fd <= tol.variance_fd,
            fd,
            tol.variance_fd,
            "relative to sup accel",
        ));
        if let Some(c) = dilation_shift(pair) {
            let bound = c * c / 4.0 + tol.accel_bound;
            report.checks.push(Check::new(
                format!("{}: sup accel <= c^2/4", pair.name),
                sup <= bound,
                sup,
                bound,
                "k-uniform bound",
            ));
        }
        report.checks.push(Check::new(
            format!("{}: geodesic defect nonnegative", pair.name),
            min_def >= -tol.defect,
            min_def,
            -tol.defect,
            "min over levels and interior nodes",
        ));
        if h.samples > 0 {
            let bg = BergmanGeodesic::from_pair(&a, &b, h.k, &ctx.quad)?;
            let r = harnack_global_check(&bg, ctx.grid, &draws, h.window, ctx.exec)?;
            for s in &r.samples {
                samples.push(
                    "harnack_global_check",
                    &tag,
                    vec![
                        pair.name.clone(),
                        h.k.to_string(),
                        num(s.tau),
                        num(s.xi),
                        num(s.t_end),
                        num(s.x_end),
                        num(s.lhs),
                        num(s.rhs),
                        num(s.delta),
                        num(s.margin(0.125)),
                        num(s.margin(0.25)),
                        num(s.margin(1.0)),
                    ],
                );
            }
            let v = r.violations(0.125, tol.harnack);
            report.checks.push(Check::new(
                format!("{}: harnack with delta/8", pair.name),
                v == 0,
                v as f64,
                0.0,
                format!(
                    "{v} of {} violate delta/8; {} violate delta/4; {} violate delta",
                    r.samples.len(),
                    r.violations(0.25, tol.harnack),
                    r.violations(1.0, tol.harnack)
                ),
            ));
        }
    }
    for (i, (spec, pot)) in random_bumps(10, ctx.cfg.seed)?.into_iter().enumerate() {
        let _ = spec;
        sob_rows.push((format!("random-{i}"), pot));
    }
    for (name, pot) in &sob_rows {
        let r = sobolev_bound_check(pot, &ctx.quad);
        sobolev.push(
            "sobolev_bound_check",
            &quad_tag(ctx.quad.len()),
            vec![name.clone(), num(r.dirichlet), num(r.aubin_yau), num(r.sup_norm), num(r.slack())],
        );
        report.checks.push(Check::new(
            format!("{name}: sobolev bound"),
            r.holds(),
            r.aubin_yau,
            2.0 * r.sup_norm,
            "J <= 2 sup|phi|",
        ));
    }
    report.tables.extend([variance, spacing, binomial, defect, samples, sobolev]);
    Ok(report)
}

pub fn suite(ctx: &Ctx) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("suite");
    let mut table = Table::new("acceptance", &["id", "name", "passed", "detail"]);
    let results = acceptance::run_suite(ctx);
    for c in &results {
        table.push(
            "acceptance",
            &grid_tag(&ctx.grid),
            vec![
                c.id.to_string(),
                c.name.into(),
                c.passed().to_string(),
                c.summary(),
            ],
        );
        println!("{}", c.line());
        let lead = c.parts.iter().find(|p| !p.passed).or(c.parts.first());
        report.checks.push(Check::new(
            format!("criterion {} {}", c.id, c.name),
            c.passed(),
            lead.map(|p| p.value).unwrap_or(f64::NAN),
            lead.map(|p| p.tolerance).unwrap_or(f64::NAN),
            format!("{} ({:.2} s)", c.summary(), c.seconds),
        ));
    }
    report.tables.push(table);
    Ok(report)
}
