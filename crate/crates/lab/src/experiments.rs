//! Experiment runners behind the CLI subcommands. Reports are plain serializable rows;
//! grid and seed sweeps run on the current rayon pool and collect in input order.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use ahpl_core::ahpl::{
    build_domains, grid_seeds, real_seeds, AHPLMap, Classification, DomainOptions, EscapeField, Grid, PeriodicPoint,
    PeriodicReport,
};
use ahpl_core::certificates::{arithmetic_report, check_controlled, outer_diameter, CertificateReport};
use ahpl_core::extension::{extend, JetSource, PlanarMap, Polynomial, Strip};
use ahpl_core::puzzles::{
    beta_fixed_point, conjugacy_evidence, equipotential_nest, piece_radii, polynomial_ray, precritical_samples,
    shrink_sample, Angle, ShrinkReport,
};
use ahpl_core::realbounds::{bounds_report, fit_c0, BoundsOptions};
use ahpl_core::unimodal::{build_tower, find_parameter, RenormalizationTower, SearchOptions, Target, TowerOptions, UnimodalMap};

use crate::config::{CertifyMode, ExperimentConfig};
use crate::error::LabResult;
use crate::output::{overlay, render, RunDir};

pub type Map = AHPLMap<UnimodalMap>;

/// Parameter, base map and tower shared by all subcommands of one run.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub a: f64,
    pub f: UnimodalMap,
    pub tower: RenormalizationTower,
    ahpl: OnceLock<Map>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> LabResult<Self> {
        let a = match (cfg.a, &cfg.combinatorics) {
            (Some(a), _) => a,
            (None, Some(p)) => find_parameter(cfg.d, &Target::Periodic(p.clone()), SearchOptions::default())?,
            (None, None) => unreachable!("validated config"),
        };
        let f = UnimodalMap::new(a, cfg.d)?;
        let tower = build_tower(&f, cfg.depth, TowerOptions::default())?;
        Ok(Self { cfg, a, f, tower, ahpl: OnceLock::new() })
    }

    /// The AHPL map at the configured level, built once.
    pub fn ahpl(&self) -> LabResult<&Map> {
        if let Some(g) = self.ahpl.get() {
            return Ok(g);
        }
        let g = ahpl_at(self.cfg, &self.f, &self.tower, self.cfg.level)?;
        Ok(self.ahpl.get_or_init(|| g))
    }
}

pub fn ahpl_at(cfg: &ExperimentConfig, f: &UnimodalMap, tower: &RenormalizationTower, level: usize) -> LabResult<Map> {
    let ext = extend(*f, cfg.m)?;
    let opts = DomainOptions { c_v: cfg.c_v, ..DomainOptions::default() };
    Ok(build_domains(&ext, Some((*f).into()), tower, level, cfg.d, &opts)?)
}

/// Escape field computed in parallel over rows.
pub fn escape_field<B: JetSource + Sync>(g: &AHPLMap<B>, grid: Grid, max_iter: u32) -> EscapeField {
    let times = (0..grid.ny)
        .into_par_iter()
        .flat_map_iter(|j| (0..grid.nx).map(move |i| g.escape_time(grid.point(i, j), max_iter)))
        .collect();
    EscapeField { grid, max_iter, times }
}

/// Periodic points of period dividing `p`, Newton runs in parallel over seeds.
pub fn periodic_search<B: JetSource + Sync>(g: &AHPLMap<B>, p: u32, seeds: &[C64]) -> LabResult<PeriodicReport> {
    let found: Vec<Option<C64>> = seeds.par_iter().map(|&s| g.newton_periodic(p, s).ok()).collect();
    Ok(g.collect_periodic(p, seeds.len(), &found)?)
}

/// Grid, real and inverse-branch seeds for period `p`.
pub fn periodic_seeds<B: JetSource>(g: &AHPLMap<B>, tower: &RenormalizationTower, p: u32) -> LabResult<Vec<C64>> {
    let real = real_seeds(tower, g.level, 2, g.c_v)?;
    let mut seeds = grid_seeds(g.c_v, 64, &real);
    seeds.extend(g.branch_seeds(p, 30));
    Ok(seeds)
}

/// Shrinking diagnostic with samples processed in parallel.
pub fn shrinking<B: JetSource + Sync>(
    g: &AHPLMap<B>,
    tower: &RenormalizationTower,
    count: usize,
    depth: usize,
    seed: u64,
) -> LabResult<ShrinkReport> {
    let chains = precritical_samples(g, count, seed);
    let radii = piece_radii(g, tower, depth)?;
    let results: Vec<_> = chains.par_iter().map(|c| shrink_sample(g, c, &radii, 96)).collect();
    let mut rep = ShrinkReport { samples: Vec::new(), rejected: count - chains.len() };
    for r in results {
        match r {
            Ok(s) => rep.samples.push(s),
            Err(_) => rep.rejected += 1,
        }
    }
    Ok(rep)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn xy(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct TowerRow {
    n: usize,
    period: Option<u32>,
    q: u64,
    lambda: f64,
    lambda_ratio: Option<f64>,
    overlap_residual: Option<f64>,
}

#[derive(Serialize)]
struct TowerReport<'a> {
    family: &'static str,
    d: u32,
    a: f64,
    combinatorics: &'a Option<Vec<u32>>,
    depth: usize,
    levels: Vec<TowerRow>,
}

pub fn renorm(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let t = &ctx.tower;
    let levels: Vec<TowerRow> = t
        .levels
        .iter()
        .map(|l| TowerRow {
            n: l.n,
            period: l.a,
            q: l.q,
            lambda: l.lambda,
            lambda_ratio: (l.n > 0).then(|| (l.lambda / t.levels[l.n - 1].lambda).abs()),
            overlap_residual: t.overlap_residual(l.n).ok(),
        })
        .collect();
    let rows: Vec<Vec<String>> = levels
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.period.map(|p| p.to_string()).unwrap_or_default(),
                r.q.to_string(),
                num(r.lambda),
                r.lambda_ratio.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    run.csv("tower.csv", &["n", "period", "q", "lambda", "lambda_ratio"], &rows)?;
    let last = levels.last().map(|l| l.q).unwrap_or(1);
    run.json(
        "tower.json",
        &TowerReport {
            family: ahpl_core::unimodal::FAMILY_ID,
            d: ctx.cfg.d,
            a: ctx.a,
            combinatorics: &ctx.cfg.combinatorics,
            depth: t.depth(),
            levels,
        },
    )?;
    run.log(format!("renorm: a = {}, depth {}, q = {last}", ctx.a, t.depth()));
    Ok(())
}

#[derive(Serialize)]
struct BoundsRow {
    n: usize,
    q: u64,
    lambda: f64,
    alpha_hat: f64,
    beta_hat: f64,
    k_hat: f64,
    s_n: f64,
    s_n_star: f64,
    c0: f64,
    c1: f64,
    c2: f64,
}

#[derive(Serialize)]
struct BoundsSummary {
    fitted_c0: f64,
    levels: Vec<BoundsRow>,
}

pub fn bounds(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let opts = BoundsOptions::default();
    let ns: Vec<usize> = (0..ctx.tower.depth()).collect();
    let reports: Vec<_> = ns.par_iter().map(|&n| bounds_report(&ctx.tower, n, &opts)).collect();
    let mut levels = Vec::with_capacity(ns.len());
    for r in reports {
        let r = r?;
        levels.push(BoundsRow {
            n: r.n,
            q: r.q,
            lambda: r.lambda,
            alpha_hat: r.alpha_hat,
            beta_hat: r.beta_hat,
            k_hat: r.k_hat,
            s_n: r.s_n,
            s_n_star: r.s_n_star,
            c0: r.c0,
            c1: r.c1,
            c2: r.c2,
        });
    }
    let header = ["n", "q", "lambda", "alpha_hat", "beta_hat", "k_hat", "s_n", "s_n_star", "c0", "c1", "c2"];
    let rows: Vec<Vec<String>> = levels
        .iter()
        .map(|r| {
            let mut v = vec![r.n.to_string(), r.q.to_string()];
            v.extend([r.lambda, r.alpha_hat, r.beta_hat, r.k_hat, r.s_n, r.s_n_star, r.c0, r.c1, r.c2].map(num));
            v
        })
        .collect();
    run.csv("bounds.csv", &header, &rows)?;
    let summary = BoundsSummary { fitted_c0: fit_c0(&ctx.f, 4096), levels };
    run.log(format!("bounds: {} levels", summary.levels.len()));
    run.json("bounds.json", &summary)
}

#[derive(Serialize)]
struct ExtendReport {
    level: usize,
    m: usize,
    strip: [f64; 4],
    degenerate: bool,
    slope: Option<f64>,
    constant: Option<f64>,
    sup_ratio: Option<f64>,
    samples: usize,
    slope_within_0_05: bool,
    quasiregular_height: Option<f64>,
}

pub fn extension(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let cfg = ctx.cfg;
    let g = ctx.tower.renormalized(cfg.extend_level)?;
    let ext = extend(g, cfg.m)?;
    let strip = Strip { x_lo: 0.3, x_hi: 0.7, y_lo: 1e-4, y_hi: 1e-2 };
    let fit = match ahpl_core::extension::verify_order(&ext, strip, 256) {
        Ok(fit) => Some(fit),
        Err(ahpl_core::error::Error::DegenerateSamples) => None,
        Err(e) => return Err(e.into()),
    };
    let (lo, hi) = (0.3, 0.9);
    let min_fprime = (0..=32)
        .map(|i| ext.jet1(C64::new(lo + (hi - lo) * i as f64 / 32.0, 0.0)).map(|j| j.1[0][0].abs()))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))?;
    let height = ext.quasiregular_height(lo, hi, 0.25 * min_fprime, 64).ok();
    let rep = ExtendReport {
        level: cfg.extend_level,
        m: cfg.m,
        strip: [strip.x_lo, strip.x_hi, strip.y_lo, strip.y_hi],
        degenerate: fit.is_none(),
        slope: fit.map(|f| f.slope),
        constant: fit.map(|f| f.constant),
        sup_ratio: fit.map(|f| f.sup_ratio),
        samples: fit.map(|f| f.samples).unwrap_or(0),
        slope_within_0_05: fit.is_some_and(|f| f.passes(cfg.m, 0.05)),
        quasiregular_height: height,
    };
    match fit {
        Some(f) => run.log(format!("extend: level {} m {} slope {}", cfg.extend_level, cfg.m, f.slope)),
        None => run.log(format!("extend: level {} m {} reproduces the map, mu = 0", cfg.extend_level, cfg.m)),
    }
    run.json("extension.json", &rep)
}

#[derive(Serialize)]
struct FieldReport {
    level: usize,
    resolution: usize,
    max_iter: u32,
    center: [f64; 2],
    half_width: f64,
    winding: i64,
    modulus_bounds: [f64; 2],
    symmetry_residual: f64,
    non_escaping_fraction: f64,
    interior_fraction: f64,
}

fn field_report(g: &Map, field: &EscapeField) -> FieldReport {
    FieldReport {
        level: g.level,
        resolution: field.grid.nx,
        max_iter: field.max_iter,
        center: xy(field.grid.center),
        half_width: field.grid.half_width,
        winding: g.winding,
        modulus_bounds: [g.modulus_bounds.0, g.modulus_bounds.1],
        symmetry_residual: g.symmetry_residual,
        non_escaping_fraction: field.non_escaping_fraction(),
        interior_fraction: field.interior_fraction(),
    }
}

fn field_csv(field: &EscapeField) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["row".to_string()];
    header.extend((0..field.grid.nx).map(|i| format!("c{i}")));
    let rows = (0..field.grid.ny)
        .map(|j| {
            let mut r = vec![j.to_string()];
            r.extend((0..field.grid.nx).map(|i| field.at(i, j).to_string()));
            r
        })
        .collect();
    (header, rows)
}

pub fn julia(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let cfg = ctx.cfg;
    let g = ctx.ahpl()?;
    let grid = Grid::covering(g.c_v, cfg.resolution, cfg.resolution);
    let field = escape_field(g, grid, cfg.max_iter);
    run.ppm("julia.ppm", grid.nx, grid.ny, &render(&field))?;
    let (header, rows) = field_csv(&field);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv("julia.csv", &header, &rows)?;
    let rep = field_report(g, &field);
    run.log(format!("julia: level {} {}x{} non-escaping {}", g.level, grid.nx, grid.ny, rep.non_escaping_fraction));
    run.json("julia.json", &rep)
}

#[derive(Serialize)]
struct PointRow {
    z: [f64; 2],
    period: u32,
    classification: &'static str,
    eigen_moduli: [f64; 2],
    real_multiplier: Option<f64>,
    derivative: [[f64; 2]; 2],
    residual: f64,
}

impl From<&PeriodicPoint> for PointRow {
    fn from(p: &PeriodicPoint) -> Self {
        Self {
            z: xy(p.z),
            period: p.period,
            classification: match p.classification {
                Classification::Expanding => "expanding",
                Classification::NonExpanding => "non_expanding",
            },
            eigen_moduli: [p.eigen_moduli.0, p.eigen_moduli.1],
            real_multiplier: p.real_multiplier,
            derivative: p.derivative,
            residual: p.residual,
        }
    }
}

#[derive(Serialize)]
struct PeriodBlock {
    p: u32,
    seeds: usize,
    failures: usize,
    all_expanding: bool,
    points: Vec<PointRow>,
}

#[derive(Serialize)]
struct PeriodicJson {
    level: usize,
    periods: Vec<PeriodBlock>,
}

#[derive(Serialize)]
struct OrbitRow {
    eta_hat: f64,
    tail_slope: f64,
    tail_increasing: bool,
}

#[derive(Serialize)]
struct ExpansionSummary {
    level: usize,
    beta_rescaled: f64,
    orbits: usize,
    depth: usize,
    eta_hat: f64,
    all_tails_increasing: bool,
    per_orbit: Vec<OrbitRow>,
}

pub fn expansion(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let cfg = ctx.cfg;
    let g = ctx.ahpl()?;
    let mut blocks = Vec::new();
    for p in 1..=cfg.max_period {
        let seeds = periodic_seeds(g, &ctx.tower, p)?;
        let rep = periodic_search(g, p, &seeds)?;
        let all_expanding = rep.points.iter().all(|q| q.classification == Classification::Expanding);
        run.log(format!("expansion: period {p}: {} points, all expanding {all_expanding}", rep.points.len()));
        blocks.push(PeriodBlock {
            p,
            seeds: rep.seeds,
            failures: rep.failures,
            all_expanding,
            points: rep.points.iter().map(PointRow::from).collect(),
        });
    }
    run.json("periodic.json", &PeriodicJson { level: g.level, periods: blocks })?;

    let beta = (beta_fixed_point(&ctx.tower, g.level)?.0 / g.lambda).abs();
    let corpus = g.expansion_corpus(beta, cfg.corpus, cfg.corpus_depth, cfg.seed)?;
    let mut rows = Vec::new();
    for (o, r) in corpus.iter().enumerate() {
        for (k, x) in r.ratios.iter().enumerate() {
            rows.push(vec![o.to_string(), (k + 1).to_string(), num(*x)]);
        }
    }
    run.csv("expansion.csv", &["orbit", "k", "r_k"], &rows)?;
    let summary = ExpansionSummary {
        level: g.level,
        beta_rescaled: beta,
        orbits: corpus.len(),
        depth: cfg.corpus_depth,
        eta_hat: corpus.iter().map(|r| r.eta_hat).fold(f64::INFINITY, f64::min),
        all_tails_increasing: corpus.iter().all(|r| r.tail_increasing),
        per_orbit: corpus
            .iter()
            .map(|r| OrbitRow { eta_hat: r.eta_hat, tail_slope: r.tail_slope, tail_increasing: r.tail_increasing })
            .collect(),
    };
    run.log(format!("expansion: eta_hat {} over {} orbits", summary.eta_hat, summary.orbits));
    run.json("expansion.json", &summary)
}

#[derive(Serialize)]
struct XiRow {
    n: u32,
    value: f64,
    log_excess: Option<f64>,
}

#[derive(Serialize)]
struct ConditionRow {
    id: &'static str,
    pass: bool,
    measured: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct CertificateJson {
    mode: &'static str,
    alpha: f64,
    delta: f64,
    theta: f64,
    #[serde(rename = "M")]
    big_m: f64,
    n0: u32,
    r: f64,
    c_alpha: f64,
    c_theta: f64,
    k1: f64,
    k2: f64,
    threshold_rhs: f64,
    threshold_margin: f64,
    minimal_n: Option<u32>,
    all_conditions_pass: Option<bool>,
    conditions: Vec<ConditionRow>,
    xi: Vec<XiRow>,
}

fn certificate_json(mode: &'static str, rep: &CertificateReport) -> CertificateJson {
    let p = &rep.params;
    let conditions: Vec<ConditionRow> = rep
        .conditions
        .iter()
        .map(|c| ConditionRow {
            id: c.id,
            pass: c.pass,
            measured: c.measured.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect(),
        })
        .collect();
    CertificateJson {
        mode,
        alpha: p.alpha,
        delta: p.delta,
        theta: p.theta,
        big_m: p.m,
        n0: p.n0,
        r: p.r,
        c_alpha: p.c_alpha,
        c_theta: p.c_theta,
        k1: rep.k1,
        k2: rep.k2,
        threshold_rhs: p.r - rep.threshold_margin,
        threshold_margin: rep.threshold_margin,
        minimal_n: rep.minimal_n,
        all_conditions_pass: (!conditions.is_empty()).then(|| rep.all_pass()),
        conditions,
        xi: rep.xi.iter().map(|x| XiRow { n: x.n, value: x.value, log_excess: x.log_excess }).collect(),
    }
}

pub fn certify(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let cfg = ctx.cfg;
    let mut p = cfg.control();
    let json = match cfg.certify_mode {
        CertifyMode::Threshold => certificate_json("threshold", &arithmetic_report(&p, 200)?),
        CertifyMode::Full => {
            let g = ctx.ahpl()?;
            p.c_alpha = outer_diameter(g, p.alpha, p.m, cfg.samples)?;
            certificate_json("full", &check_controlled(g, &p, cfg.samples)?)
        }
    };
    match json.all_conditions_pass {
        Some(ok) => run.log(format!("certify: margin {} conditions pass {ok}", json.threshold_margin)),
        None => run.log(format!("certify: margin {}", json.threshold_margin)),
    }
    run.json("certificate.json", &json)
}

#[derive(Serialize)]
struct RayRow {
    angle: [u64; 2],
    resolved_levels: usize,
    tail_diameter: f64,
    landing: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct ShrinkRow {
    z: [f64; 2],
    depth: usize,
    ratio: f64,
    diameters: Vec<f64>,
}

#[derive(Serialize)]
struct PuzzleReport {
    level: usize,
    beta: f64,
    beta_multiplier: f64,
    nest_euclid_diam: Vec<f64>,
    nest_hyp_diam: Vec<f64>,
    nest_increment_ratios: Vec<f64>,
    rays: Vec<RayRow>,
    shrink_max_ratio: f64,
    shrink_rejected: usize,
    shrink: Vec<ShrinkRow>,
    itinerary_length: usize,
    first_disagreement: Option<usize>,
}

fn polyline_rows(label: String, curve: &[C64], rows: &mut Vec<Vec<String>>) {
    let n = curve.len().max(2) - 1;
    for (k, z) in curve.iter().enumerate() {
        rows.push(vec![label.clone(), num(k as f64 / n as f64), num(z.re), num(z.im)]);
    }
}

pub fn puzzle(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    let cfg = ctx.cfg;
    let g = ctx.ahpl()?;
    let (beta, mult) = beta_fixed_point(&ctx.tower, g.level)?;

    let nest = equipotential_nest(g, C64::new(0.0, 0.0), cfg.nest_depth, 1024)?;
    let mut rows = Vec::new();
    for (j, c) in nest.curves.iter().enumerate() {
        polyline_rows(j.to_string(), c, &mut rows);
    }
    run.csv("nest.csv", &["curve", "t", "x", "y"], &rows)?;

    let angles: Vec<Angle> = cfg.rays.iter().map(|[n, d]| Angle::new(*n, *d)).collect::<Result<_, _>>()?;
    let rays: Vec<_> = angles.par_iter().map(|a| polynomial_ray(&ctx.f, *a, cfg.ray_levels)).collect();
    let rays = rays.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for r in &rays {
        polyline_rows(format!("{}/{}", r.angle.num, r.angle.den), &r.points, &mut rows);
    }
    run.csv("rays.csv", &["angle", "t", "x", "y"], &rows)?;

    let shrink = shrinking(g, &ctx.tower, cfg.shrink_samples, cfg.shrink_depth, cfg.seed)?;
    let poly: Polynomial = ctx.f.into();
    let conj = conjugacy_evidence(g, &poly, cfg.itinerary_length)?;

    let grid = Grid::covering(g.c_v, cfg.resolution, cfg.resolution);
    let mut rgb = render(&escape_field(g, grid, cfg.max_iter));
    for c in &nest.curves {
        let mut closed = c.clone();
        closed.extend(c.first().copied());
        overlay(&mut rgb, &grid, &closed, [255, 255, 255]);
    }
    run.ppm("puzzle.ppm", grid.nx, grid.ny, &rgb)?;

    let base = ahpl_at(cfg, &ctx.f, &ctx.tower, 0)?;
    let grid0 = Grid::covering(base.c_v, cfg.resolution, cfg.resolution);
    let mut rgb = render(&escape_field(&base, grid0, cfg.max_iter));
    for r in &rays {
        overlay(&mut rgb, &grid0, &r.points, [255, 40, 40]);
    }
    run.ppm("rays.ppm", grid0.nx, grid0.ny, &rgb)?;

    let rep = PuzzleReport {
        level: g.level,
        beta,
        beta_multiplier: mult,
        nest_euclid_diam: nest.euclid_diam.clone(),
        nest_hyp_diam: nest.hyp_diam.clone(),
        nest_increment_ratios: nest.increment_ratios(),
        rays: rays
            .iter()
            .map(|r| RayRow {
                angle: [r.angle.num, r.angle.den],
                resolved_levels: r.resolved_levels,
                tail_diameter: r.tail_diameter,
                landing: r.landing.map(xy),
            })
            .collect(),
        shrink_max_ratio: shrink.max_ratio(),
        shrink_rejected: shrink.rejected,
        shrink: shrink
            .samples
            .iter()
            .map(|s| ShrinkRow { z: xy(s.z), depth: s.depth, ratio: s.ratio, diameters: s.diameters.clone() })
            .collect(),
        itinerary_length: conj.length,
        first_disagreement: conj.first_disagreement,
    };
    run.log(format!(
        "puzzle: shrink max ratio {} over {} samples, first disagreement {:?}",
        rep.shrink_max_ratio,
        rep.shrink.len(),
        rep.first_disagreement
    ));
    run.json("puzzle.json", &rep)
}

pub fn all(ctx: &Context, run: &mut RunDir) -> LabResult<()> {
    renorm(ctx, run)?;
    bounds(ctx, run)?;
    extension(ctx, run)?;
    julia(ctx, run)?;
    expansion(ctx, run)?;
    certify(ctx, run)?;
    puzzle(ctx, run)
}
