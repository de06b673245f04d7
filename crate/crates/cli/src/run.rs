use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mms_lab::contraction::{
    chebyshev_samples, mcp_check, necklace_schedule, scalar_bound_check, schedule_density_check,
    MCPReport,
};
use mms_lab::generators::Necklace;
use mms_lab::io::{
    parse_generator_params, parse_measure, parse_permutation, parse_space, space_to_json,
    CellSelector,
};
use mms_lab::regularity::{
    epsilon_regular_scan, gh_exact, gh_lower_bound, regular_set_measure, ScanOptions, Verdict,
};
use mms_lab::symmetry::{
    condition_a_among, critical_scale, displacement, enumerate_isometries, euclidean_power_escape,
    fixed_set, generate_subgroup, large_fix_implies_small_displacement, probe_among,
    ConditionAVerdict, Enumeration, EscapeOutcome, EuclideanIsometry, ProbeVerdict, Subgroup,
};
use mms_lab::transport::{
    lift_to_geodesic_plan, run_competitor, solve_w2, uniqueness_probe, CompetitorOptions,
    TargetVariant,
};
use mms_lab::{FiniteMMS, Measure};

use crate::args::*;
use crate::report::{CliError, CliResult, Outcome, Table};

const GROUP_BUDGET: usize = 1 << 16;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_space(a: &SpaceArg) -> CliResult<FiniteMMS> {
    Ok(parse_space(&read(&a.space)?)?)
}

/// Inline JSON when the argument looks like JSON, otherwise a file path.
fn inline_or_file(arg: &str) -> CliResult<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        read(Path::new(arg))
    }
}

fn load_measure(arg: &str, space: &FiniteMMS) -> CliResult<Measure> {
    let m = parse_measure(&inline_or_file(arg)?)?;
    m.check_support(space)?;
    Ok(m)
}

fn load_perm(arg: &str, space: &FiniteMMS) -> CliResult<Vec<usize>> {
    let p = parse_permutation(&inline_or_file(arg)?)?;
    if p.len() != space.len() {
        return Err(CliError::Usage(format!(
            "permutation has {} entries, space has {} points",
            p.len(),
            space.len()
        )));
    }
    Ok(p)
}

fn select(sel: &str, space: &FiniteMMS) -> CliResult<Vec<usize>> {
    Ok(CellSelector::parse(sel)?.resolve(space)?)
}

fn whole_group(space: &FiniteMMS, en: &Enumeration) -> Subgroup {
    let mut g = Subgroup {
        elements: en.maps.iter().map(|m| m.perm.clone()).collect(),
        generators: Vec::new(),
        closed: false,
    };
    g.closed = g.verify_closed();
    if g.elements.is_empty() {
        g = Subgroup::trivial(space.len());
    }
    g
}

fn group(space: &FiniteMMS, arg: &GroupArg, tols: &IsoTols) -> CliResult<(Subgroup, bool)> {
    if arg.gens.is_empty() {
        let en = enumerate_isometries(space, tols.iso_tol, tols.budget);
        return Ok((whole_group(space, &en), en.truncated));
    }
    let gens = arg
        .gens
        .iter()
        .map(|g| load_perm(g, space))
        .collect::<CliResult<Vec<_>>>()?;
    let g = generate_subgroup(space.len(), &gens, GROUP_BUDGET);
    let truncated = !g.closed;
    Ok((g, truncated))
}

fn mcp_table(r: &MCPReport) -> Table {
    Table {
        header: vec!["t", "cell", "lhs", "rhs", "slack"],
        rows: r
            .records
            .iter()
            .map(|c| {
                vec![
                    json!(c.t),
                    json!(c.cell),
                    json!(c.lhs),
                    json!(c.rhs),
                    json!(c.slack),
                ]
            })
            .collect(),
    }
}

/// Name of the verb as typed on the command line.
pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Space(SpaceCmd::Gen { .. }) => "space gen",
        Command::Space(SpaceCmd::Validate { .. }) => "space validate",
        Command::Ot(OtCmd::Solve(_)) => "ot solve",
        Command::Ot(OtCmd::Probe { .. }) => "ot probe",
        Command::Ot(OtCmd::Competitor { .. }) => "ot competitor",
        Command::Mcp(McpCmd::Verify { .. }) => "mcp verify",
        Command::Mcp(McpCmd::Schedule { .. }) => "mcp schedule",
        Command::Mcp(McpCmd::ScalarBound { .. }) => "mcp scalar-bound",
        Command::Iso(IsoCmd::Enum { .. }) => "iso enum",
        Command::Iso(IsoCmd::Fix { .. }) => "iso fix",
        Command::Iso(IsoCmd::Displacement { .. }) => "iso displacement",
        Command::Iso(IsoCmd::ConditionA { .. }) => "iso condition-a",
        Command::Iso(IsoCmd::Probe { .. }) => "iso probe",
        Command::Iso(IsoCmd::Escape { .. }) => "iso escape",
        Command::Iso(IsoCmd::CriticalScale { .. }) => "iso critical-scale",
        Command::Gh(GhCmd::Exact { .. }) => "gh exact",
        Command::Gh(GhCmd::Scan { .. }) => "gh scan",
        Command::Gh(GhCmd::RegularMass { .. }) => "gh regular-mass",
    }
}

/// Runs one verb. Nothing is written here except the generated space of `space gen`.
pub fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Space(c) => space(c),
        Command::Ot(c) => ot(c),
        Command::Mcp(c) => mcp(c),
        Command::Iso(c) => iso(c, cli.common.seed),
        Command::Gh(c) => gh(c),
    }
}

fn space(c: &SpaceCmd) -> CliResult<Outcome> {
    match c {
        SpaceCmd::Gen { kind, params, out } => {
            let spec = parse_generator_params(kind.name(), params)?;
            let s = spec.build()?;
            fs::write(out, space_to_json(&s) + "\n").map_err(|e| CliError::io(out, e))?;
            Ok(Outcome::new(
                "model spaces",
                json!({
                    "points": s.len(),
                    "total_mass": s.total_mass(),
                    "diameter": s.diameter(),
                    "meta": s.meta(),
                    "out": out,
                }),
            ))
        }
        SpaceCmd::Validate { space } => {
            let s = load_space(space)?;
            let d = s.validate();
            Ok(Outcome::new(
                "metric measure space",
                json!({ "valid": d.is_valid(), "points": s.len(), "total_mass": s.total_mass(), "diagnostics": d }),
            ))
        }
    }
}

fn ot(c: &OtCmd) -> CliResult<Outcome> {
    match c {
        OtCmd::Solve(a) => {
            let s = load_space(&a.space)?;
            let (mu0, mu1) = (load_measure(&a.mu0, &s)?, load_measure(&a.mu1, &s)?);
            let (cost, coupling) = solve_w2(&s, &mu0, &mu1)?;
            Ok(Outcome::new(
                "wasserstein squared distance",
                json!({ "cost": cost, "marginal_defect": coupling.marginal_defect(), "coupling": coupling }),
            ))
        }
        OtCmd::Probe { ot: a, tol } => {
            let s = load_space(&a.space)?;
            let (mu0, mu1) = (load_measure(&a.mu0, &s)?, load_measure(&a.mu1, &s)?);
            let v = uniqueness_probe(&s, &mu0, &mu1, *tol)?;
            Ok(Outcome::new(
                "optimal geodesic plans",
                json!({ "unique": v.is_unique(), "probe": v }),
            ))
        }
        OtCmd::Competitor {
            space,
            f,
            a,
            x,
            variant,
            radius,
            tol,
        } => {
            let s = load_space(space)?;
            let f = load_perm(f, &s)?;
            let a_set = select(a, &s)?;
            s.check_index(*x)?;
            let variant = match (variant, radius) {
                (VariantArg::Point, _) => TargetVariant::Point,
                (VariantArg::Ball, Some(r)) => TargetVariant::Ball { radius: *r },
                (VariantArg::Ball, None) => {
                    return Err(CliError::Usage("--variant ball needs --radius".into()))
                }
            };
            let opts = CompetitorOptions {
                variant,
                ..CompetitorOptions::default()
            };
            let run = run_competitor(&s, &f, &a_set, *x, &opts, *tol)?;
            Ok(Outcome::new(
                "zero measure of the fixed point set",
                json!({
                    "non_unique": run.report.marginals_equal && run.report.cost_equal && run.report.distinct,
                    "report": run.report,
                    "plan_induced_by_map": run.plan_induced_by_map,
                    "competitor_induced_by_map": run.competitor_induced_by_map,
                    "cost": run.plan.cost(),
                    "plan": run.plan,
                    "competitor": run.competitor,
                }),
            ))
        }
    }
}

fn mcp(c: &McpCmd) -> CliResult<Outcome> {
    match c {
        McpCmd::Verify {
            space,
            x,
            a,
            plan,
            samples,
        } => {
            let s = load_space(space)?;
            let a_set = select(a, &s)?;
            s.check_index(*x)?;
            let plan = match plan {
                PlanKind::Auto => {
                    let target = Measure::normalized_restriction(&s, &a_set)?;
                    let (_, c) = solve_w2(&s, &Measure::dirac(*x), &target)?;
                    lift_to_geodesic_plan(&s, &c, 1)?
                }
                PlanKind::Schedule => {
                    necklace_schedule(&Necklace::from_space(&s)?, *x, &a_set)?.plan
                }
            };
            let t = chebyshev_samples(samples.t_samples, &[]);
            let r = mcp_check(&s, *x, &a_set, &plan, &t, samples.allowance)?;
            let table = mcp_table(&r);
            Ok(Outcome::new("measure contraction property", r).with_table(table))
        }
        McpCmd::Schedule {
            space,
            z,
            a,
            samples,
        } => {
            let s = load_space(space)?;
            let n = Necklace::from_space(&s)?;
            let a_set = select(a, &s)?;
            let sched = necklace_schedule(&n, *z, &a_set)?;
            let t = chebyshev_samples(samples.t_samples, &[sched.params.t_hat]);
            let r = schedule_density_check(&n, &sched, &t, samples.allowance)?;
            let table = Table {
                header: vec!["t", "cell", "lhs", "rhs", "slack", "ratio"],
                rows: r
                    .records
                    .iter()
                    .map(|c| {
                        vec![
                            json!(c.t),
                            json!(c.cell),
                            json!(c.lhs),
                            json!(c.rhs),
                            json!(c.slack),
                            json!(c.ratio),
                        ]
                    })
                    .collect(),
            };
            Ok(Outcome::new("fancy necklace transport schedule", r).with_table(table))
        }
        McpCmd::ScalarBound { t_grid, d_grid } => {
            let r = scalar_bound_check(*t_grid, *d_grid)?;
            Ok(Outcome::new("scalar estimate for the necklace", r))
        }
    }
}

fn iso(c: &IsoCmd, seed: u64) -> CliResult<Outcome> {
    match c {
        IsoCmd::Enum { space, tols } => {
            let s = load_space(space)?;
            let en = enumerate_isometries(&s, tols.iso_tol, tols.budget);
            let truncated = en.truncated;
            Ok(Outcome::new(
                "isometries of the space",
                json!({ "count": en.maps.len(), "truncated": truncated, "nodes": en.nodes, "maps": en.maps }),
            )
            .inconclusive(truncated))
        }
        IsoCmd::Fix {
            space,
            g,
            fix_tol,
            x,
            big_n,
            tols,
        } => {
            let s = load_space(space)?;
            let (maps, truncated) = match g {
                Some(g) => (vec![load_perm(g, &s)?], false),
                None => {
                    let en = enumerate_isometries(&s, tols.iso_tol, tols.budget);
                    (en.maps.into_iter().map(|m| m.perm).collect(), en.truncated)
                }
            };
            let mut rows = Vec::new();
            let mut entries = Vec::new();
            for (i, m) in maps.iter().enumerate() {
                let fix = fixed_set(&s, m, *fix_tol);
                let moved = s.total_mass() - fix.measure;
                rows.push(vec![
                    json!(i),
                    json!(fix.cells.len()),
                    json!(fix.measure),
                    json!(moved),
                ]);
                let implication = match (x, big_n) {
                    (Some(x), Some(n)) => Some(large_fix_implies_small_displacement(
                        &s, m, *x, *n, *fix_tol,
                    )?),
                    (None, None) => None,
                    _ => return Err(CliError::Usage("--x and --big-n go together".into())),
                };
                entries.push(json!({ "perm": m, "fixed": fix, "moved_measure": moved, "implication": implication }));
            }
            let table = Table {
                header: vec!["map", "fixed_cells", "fixed_measure", "moved_measure"],
                rows,
            };
            Ok(Outcome::new(
                "zero measure of the fixed point set",
                json!({ "total_mass": s.total_mass(), "truncated": truncated, "maps": entries }),
            )
            .with_table(table)
            .inconclusive(truncated))
        }
        IsoCmd::Displacement {
            space,
            x,
            r,
            group: g,
            tols,
        } => {
            let s = load_space(space)?;
            let (grp, truncated) = group(&s, g, tols)?;
            let d = displacement(&s, &grp, *r, *x)?;
            Ok(Outcome::new(
                "displacement functional",
                json!({ "displacement": d, "order": grp.order(), "closed": grp.closed, "r": r, "x": x }),
            )
            .inconclusive(truncated))
        }
        IsoCmd::ConditionA {
            space,
            x,
            s: radius,
            fix_tol,
            tols,
        } => {
            let s = load_space(space)?;
            s.check_index(*x)?;
            if !(*radius > 0.0) {
                return Err(CliError::Usage("--s must be positive".into()));
            }
            let en = enumerate_isometries(&s, tols.iso_tol, tols.budget);
            let r = condition_a_among(&s, *x, *radius, *fix_tol, &en);
            let inconclusive = r.verdict == ConditionAVerdict::Inconclusive || en.truncated;
            Ok(Outcome::new(
                "fixed point condition",
                json!({ "truncated": en.truncated, "report": r }),
            )
            .inconclusive(inconclusive))
        }
        IsoCmd::Probe {
            space,
            eps,
            k,
            tols,
        } => {
            let s = load_space(space)?;
            let k_set = select(k, &s)?;
            let en = enumerate_isometries(&s, tols.iso_tol, tols.budget);
            let v = probe_among(&s, *eps, &k_set, &en);
            let inconclusive = matches!(v, ProbeVerdict::Inconclusive { .. });
            Ok(Outcome::new(
                "small subgroups property",
                json!({ "enumerated": en.maps.len(), "truncated": en.truncated, "probe": v }),
            )
            .inconclusive(inconclusive))
        }
        IsoCmd::Escape {
            dim,
            samples,
            max_angle,
            max_shift,
            threshold,
            max_pow,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rows = Vec::new();
            let (mut escaped, mut max_n) = (0usize, 0u64);
            while rows.len() < *samples {
                let g = EuclideanIsometry::random(&mut rng, *dim, *max_angle, *max_shift)?;
                if g.is_identity() {
                    continue;
                }
                let start = g.sup_displacement(0.5);
                let (n, disp) = match euclidean_power_escape(&g, *threshold, *max_pow)? {
                    EscapeOutcome::Escaped { n, displacement } => {
                        escaped += 1;
                        max_n = max_n.max(n);
                        (Some(n), displacement)
                    }
                    EscapeOutcome::Failed {
                        last_displacement, ..
                    } => (None, last_displacement),
                };
                rows.push(vec![json!(rows.len()), json!(start), json!(n), json!(disp)]);
            }
            let outcomes: Vec<Value> = rows
                .iter()
                .map(|r| json!({ "initial": r[1], "n": r[2], "displacement": r[3] }))
                .collect();
            let table = Table {
                header: vec!["sample", "initial", "n", "displacement"],
                rows,
            };
            Ok(Outcome::new(
                "no small subgroups in euclidean isometries",
                json!({
                    "samples": samples,
                    "escaped": escaped,
                    "all_escaped": escaped == *samples,
                    "max_n": max_n,
                    "outcomes": outcomes,
                }),
            )
            .with_table(table))
        }
        IsoCmd::CriticalScale {
            space,
            x,
            lo,
            hi,
            tol,
            group: g,
            tols,
        } => {
            let s = load_space(space)?;
            let (grp, truncated) = group(&s, g, tols)?;
            let r = critical_scale(&s, &grp, *x, *lo, *hi, *tol)?;
            Ok(Outcome::new(
                "quadruple search for the critical scale",
                json!({ "order": grp.order(), "result": r }),
            )
            .inconclusive(truncated))
        }
    }
}

fn scan_options(a: &ScanArgs) -> ScanOptions {
    ScanOptions {
        r_samples: a.r_samples,
        ..ScanOptions::default()
    }
}

fn gh(c: &GhCmd) -> CliResult<Outcome> {
    match c {
        GhCmd::Exact { space, space2 } => {
            let x = load_space(space)?;
            let y = parse_space(&read(space2)?)?;
            let (v, w) = gh_exact(&x, &y)?;
            Ok(Outcome::new(
                "gromov-hausdorff distance",
                json!({ "distance": v, "lower_bound": gh_lower_bound(&x, &y), "correspondence": w }),
            ))
        }
        GhCmd::Scan { space, x, scan } => {
            let s = load_space(space)?;
            let r =
                epsilon_regular_scan(&s, *x, scan.eps, scan.delta, &scan.k, &scan_options(scan))?;
            let inconclusive = r.per_k.iter().any(|k| k.verdict == Verdict::Inconclusive);
            Ok(Outcome::new("epsilon regular set", r).inconclusive(inconclusive))
        }
        GhCmd::RegularMass {
            space,
            scan,
            budget,
        } => {
            let s = load_space(space)?;
            let r = regular_set_measure(
                &s,
                scan.eps,
                scan.delta,
                &scan.k,
                *budget,
                &scan_options(scan),
            )?;
            let inconclusive = r.inconclusive_mass > 0.0;
            Ok(Outcome::new("regular set has full measure", r).inconclusive(inconclusive))
        }
    }
}
