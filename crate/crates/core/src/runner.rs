//! Executes a scenario: the exact reference, every requested semiclassical
//! estimator, overlaps, region metrics and output files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalized_overlap, CellFlags, Grid, WaveField};
use crate::potentials::PotentialSpec;
use crate::quantum::{line_cut, propagate_observed, region_probability};
use crate::scenarios::{Families, Method, Region, Scenario, SeedLine};
use crate::semiclassical::{
    assemble_real, assemble_sc, assemble_tga, masked_overlap, EstimatorField,
};
use crate::shooting::{
    billiard_q_roots, centre_root, continuation_sweep, continue_complex, continue_real,
    enumerate_families, follow_edge, follow_path, merge_sweeps, real_start, solve_real,
    write_root_csv, Anchor, ComplexRoot, Propagation, RealKind, RealRoot, ShootError, SweepResult,
};
use crate::{evolve, ComplexPhasePoint};

/// Roots closer than this (scaled units) in one cell are the same root.
const SWEEP_DEDUP: f64 = 1e-6;
/// Family ids of roots seeded from extra anchors start here.
const EXTRA_FAMILY_BASE: u32 = 100;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where output files go; `None` computes without writing.
    pub out_dir: Option<PathBuf>,
    pub progress: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactReport {
    pub seconds: f64,
    pub steps: usize,
    pub norm_drift: f64,
    /// Probability outside the output window.
    pub outside_window: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct FamilyStats {
    pub nodes_reached: usize,
    pub max_roots: usize,
    pub mean_roots: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub overlap: f64,
    pub caustic_cells: usize,
    pub unreachable_cells: usize,
    pub filtered_cells: usize,
    pub families: FamilyStats,
    /// Overlap with the exact field, both restricted to the region and renormalised.
    #[serde(default)]
    pub region_overlap: BTreeMap<String, f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub window_points: [usize; 2],
    pub exact: ExactReport,
    /// Exact probability in each configured region.
    #[serde(default)]
    pub region_probability: BTreeMap<String, f64>,
    pub methods: Vec<MethodReport>,
    pub total_seconds: f64,
    #[serde(default)]
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "scenario {}  window {}x{}  exact {:.1}s  norm drift {:.1e}\n",
            self.scenario,
            self.window_points[0],
            self.window_points[1],
            self.exact.seconds,
            self.exact.norm_drift
        );
        for (name, p) in &self.region_probability {
            s += &format!("region {name}: exact probability {p:.4}\n");
        }
        let regions: Vec<&String> = self.region_probability.keys().collect();
        s += &format!(
            "{:<7}{:>10}{:>9}{:>9}{:>9}{:>8}",
            "method", "overlap", "caustic", "unreach", "filter", "roots"
        );
        for r in &regions {
            s += &format!("{:>14}", format!("ov[{r}]"));
        }
        s += &format!("{:>9}\n", "time");
        for m in &self.methods {
            s += &format!(
                "{:<7}{:>10.5}{:>9}{:>9}{:>9}{:>8}",
                m.method.name(),
                m.overlap,
                m.caustic_cells,
                m.unreachable_cells,
                m.filtered_cells,
                m.families.max_roots
            );
            for r in &regions {
                match m.region_overlap.get(*r) {
                    Some(v) => s += &format!("{v:>14.5}"),
                    None => s += &format!("{:>14}", "-"),
                }
            }
            s += &format!("{:>8.1}s\n", m.seconds);
        }
        s
    }
}

/// Everything a run computes, kept in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    /// Exact field on the whole propagation domain.
    pub exact_full: WaveField,
    /// Exact field on the output window.
    pub exact: WaveField,
    pub fields: BTreeMap<Method, EstimatorField>,
    pub complex_roots: Option<SweepResult<ComplexRoot>>,
    pub real_roots: BTreeMap<Method, SweepResult<RealRoot>>,
}

fn progress(opts: &RunOptions, msg: impl AsRef<str>) {
    if opts.progress {
        eprintln!("[scwave] {}", msg.as_ref());
    }
}

fn shoot_err(e: ShootError) -> Error {
    Error::Shooting(e)
}

/// Exact propagation; returns the full-domain field, the window crop and
/// the run statistics.
pub fn exact_reference(scenario: &Scenario) -> Result<(WaveField, WaveField, ExactReport)> {
    let start = Instant::now();
    let full = scenario.grid.full()?;
    let (window, offset) = scenario.grid.window()?;
    let mut initial_norm = 0.0;
    let mut steps = 0;
    let every = usize::MAX;
    let psi = propagate_observed(
        &scenario.packet,
        &scenario.hamiltonian(),
        scenario.time,
        &full,
        scenario.grid.dt,
        every,
        |t, f| {
            if t == 0.0 {
                initial_norm = f.norm_sqr();
            }
        },
    )?;
    let (n, _) = crate::quantum::step_count(scenario.time, scenario.grid.dt)?;
    steps += n;
    let norm = psi.norm_sqr();
    let cropped = psi.crop(&window, offset)?;
    let report = ExactReport {
        seconds: start.elapsed().as_secs_f64(),
        steps,
        norm_drift: (norm - initial_norm).abs(),
        outside_window: ((norm - cropped.norm_sqr()) / norm).max(0.0),
    };
    Ok((psi, cropped, report))
}

fn node_of(grid: &Grid, x: &[f64]) -> ((usize, usize), [f64; 2]) {
    let cell = grid.nearest([x[0], x[1]]);
    (cell, grid.point(cell.0, cell.1))
}

/// Main-family (or all-family) complex roots over the window.
pub fn complex_sweep(scenario: &Scenario, grid: &Grid) -> Result<SweepResult<ComplexRoot>> {
    let ham = scenario.hamiltonian();
    let prop = Propagation::new(&ham, &scenario.packet, scenario.time);
    let s = &scenario.shooting;
    let (root, xc) = centre_root(&prop, s).map_err(shoot_err)?;
    let (cell, node) = node_of(grid, &xc);
    let main = follow_path(root, &xc, &node, scenario.packet.b(), |r, a, b| {
        continue_complex(r, a, b, &prop, s)
    })
    .map_err(shoot_err)?;
    let roots = match scenario.roots.families {
        Families::Main => vec![main],
        Families::All => {
            let mut found = enumerate_families(&node, &prop, s)
                .map_err(shoot_err)?
                .roots;
            if !found.iter().any(|r| r.family_id == 0) {
                found.insert(0, main);
            }
            found
        }
    };
    Ok(continuation_sweep(
        grid,
        Anchor { cell, roots },
        SWEEP_DEDUP,
        |r, from, to| continue_complex(r, &from, &to, &prop, s),
    ))
}

fn real_kind(m: Method) -> Option<RealKind> {
    match m {
        Method::Q => Some(RealKind::QtoX),
        Method::P => Some(RealKind::PtoX),
        Method::Mixed => Some(RealKind::Mixed),
        _ => None,
    }
}

fn anchors_for<'s>(scenario: &'s Scenario, m: Method) -> &'s [SeedLine] {
    match m {
        Method::Q => &scenario.roots.q_anchors,
        Method::P => &scenario.roots.p_anchors,
        Method::Mixed => &scenario.roots.mixed_anchors,
        _ => &[],
    }
}

/// Real roots over the window: the centre family carried from the centre
/// trajectory's endpoint, merged with sweeps from any extra anchors. On the
/// billiard every node is solved in closed form.
pub fn real_sweep(scenario: &Scenario, m: Method, grid: &Grid) -> Result<SweepResult<RealRoot>> {
    let kind = real_kind(m)
        .ok_or_else(|| Error::Config(format!("{m} is not a real-trajectory method")))?;
    let ham = scenario.hamiltonian();
    let prop = Propagation::new(&ham, &scenario.packet, scenario.time);
    if let PotentialSpec::Billiard { radius, .. } = scenario.potential {
        use rayon::prelude::*;
        let per_node: Vec<_> = (0..grid.len())
            .into_par_iter()
            .map(|i| billiard_q_roots(&grid.point_at(i), &prop, radius))
            .collect();
        let mut out = SweepResult {
            grid: *grid,
            roots: Vec::with_capacity(grid.len()),
            failures: 0,
        };
        for r in per_node {
            let r = r.map_err(shoot_err)?;
            out.failures += r.failures.len();
            out.roots.push(r.roots);
        }
        return Ok(out);
    }
    let s = &scenario.shooting;
    let scale = scenario.packet.b();
    let step = |r: &RealRoot, from: [f64; 2], to: [f64; 2]| {
        follow_edge(r.clone(), &from, &to, scale, |r, a, b| {
            continue_real(r, a, b, &prop, s)
        })
    };

    let centre = prop.centre_trajectory(&s.integrator).map_err(shoot_err)?;
    let xc = centre.end().real_x();
    let seed = kind.centre_unknowns(&scenario.packet);
    let mut sweep = None;
    match solve_real(kind, &xc, &prop, &seed, s) {
        Ok(root) => {
            let (cell, node) = node_of(grid, &xc);
            match follow_path(root, &xc, &node, scale, |r, a, b| {
                continue_real(r, a, b, &prop, s)
            }) {
                Ok(root) => {
                    sweep = Some(continuation_sweep(
                        grid,
                        Anchor {
                            cell,
                            roots: vec![root],
                        },
                        SWEEP_DEDUP,
                        step,
                    ))
                }
                Err(e) => {
                    if anchors_for(scenario, m).is_empty() {
                        return Err(shoot_err(e));
                    }
                }
            }
        }
        Err(e) => {
            if anchors_for(scenario, m).is_empty() {
                return Err(shoot_err(e));
            }
        }
    }
    for (k, line) in anchors_for(scenario, m).iter().enumerate() {
        let (cell, node) = node_of(grid, &line.at);
        let mut roots: Vec<RealRoot> = Vec::new();
        for seed in line.seeds() {
            if let Ok(mut r) = solve_real(kind, &node, &prop, &seed, s) {
                if !roots
                    .iter()
                    .any(|o| crate::shooting::SweepRoot::distance(o, &r) < SWEEP_DEDUP)
                {
                    r.family_id = EXTRA_FAMILY_BASE * (k as u32 + 1) + roots.len() as u32;
                    roots.push(r);
                }
            }
        }
        if roots.is_empty() {
            continue;
        }
        let extra = continuation_sweep(grid, Anchor { cell, roots }, SWEEP_DEDUP, step);
        sweep = Some(match sweep {
            Some(a) => merge_sweeps(a, extra, SWEEP_DEDUP),
            None => extra,
        });
    }
    sweep.ok_or_else(|| {
        shoot_err(ShootError::Invalid(format!(
            "no {m} roots found at any anchor"
        )))
    })
}

fn family_stats<R>(sweep: &SweepResult<R>) -> FamilyStats {
    let counts: Vec<usize> = sweep.roots.iter().map(Vec::len).collect();
    FamilyStats {
        nodes_reached: sweep.reached(),
        max_roots: counts.iter().copied().max().unwrap_or(0),
        mean_roots: counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64,
        failures: sweep.failures,
    }
}

/// Overlap restricted to `region`, caustic cells removed, both renormalised.
pub fn region_overlap(exact: &WaveField, approx: &EstimatorField, region: &Region) -> Result<f64> {
    let restricted = EstimatorField {
        field: approx.field.masked(|x| region.contains(x)),
        flags: approx.flags.clone(),
    };
    masked_overlap(&exact.masked(|x| region.contains(x)), &restricted)
}

/// Run the scenario and, when an output directory is given, write its files.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    scenario.validate()?;
    let clock = Instant::now();
    let (window, _) = scenario.grid.window()?;
    progress(
        opts,
        format!(
            "{}: exact propagation on {}x{}",
            scenario.name, scenario.grid.points[0], scenario.grid.points[1]
        ),
    );
    let (exact_full, exact, exact_report) = exact_reference(scenario)?;
    progress(opts, format!("exact done in {:.1}s", exact_report.seconds));

    let mut region_probability_map = BTreeMap::new();
    for r in &scenario.output.regions {
        let p = region_probability(&exact_full, |x| r.contains(x)) / exact_full.norm_sqr();
        region_probability_map.insert(r.name.clone(), p);
    }

    let mut fields = BTreeMap::new();
    let mut reports = Vec::new();
    let mut complex_roots = None;
    let mut real_roots = BTreeMap::new();
    for m in scenario.method_set() {
        if m == Method::Exact {
            continue;
        }
        let t0 = Instant::now();
        progress(opts, format!("{m}: {}x{} nodes", window.nx, window.ny));
        let ham = scenario.hamiltonian();
        let (field, stats) = match m {
            Method::Tga => {
                let prop = Propagation::new(&ham, &scenario.packet, scenario.time);
                let centre = prop
                    .centre_trajectory(&scenario.shooting.integrator)
                    .map_err(shoot_err)?;
                (
                    assemble_tga(&window, &centre, &scenario.packet),
                    FamilyStats {
                        nodes_reached: window.len(),
                        max_roots: 1,
                        mean_roots: 1.0,
                        failures: 0,
                    },
                )
            }
            Method::Sc => {
                let sweep = complex_sweep(scenario, &window)?;
                let f = assemble_sc(&sweep, &scenario.packet, &scenario.assembly);
                let st = family_stats(&sweep);
                complex_roots = Some(sweep);
                (f, st)
            }
            _ => {
                let kind = real_kind(m).expect("real method");
                let sweep = real_sweep(scenario, m, &window)?;
                let f = assemble_real(kind, &sweep, &scenario.packet, &scenario.assembly);
                let st = family_stats(&sweep);
                real_roots.insert(m, sweep);
                (f, st)
            }
        };
        let overlap = masked_overlap(&exact, &field)?;
        let mut region_overlap_map = BTreeMap::new();
        for r in &scenario.output.regions {
            region_overlap_map.insert(r.name.clone(), region_overlap(&exact, &field, r)?);
        }
        let report = MethodReport {
            method: m,
            overlap,
            caustic_cells: field.flags.count(CellFlags::CAUSTIC),
            unreachable_cells: field.flags.count(CellFlags::UNREACHABLE),
            filtered_cells: field.flags.count(CellFlags::FILTERED),
            families: stats,
            region_overlap: region_overlap_map,
            seconds: t0.elapsed().as_secs_f64(),
        };
        progress(
            opts,
            format!(
                "{m}: overlap {:.5} in {:.1}s",
                report.overlap, report.seconds
            ),
        );
        reports.push(report);
        fields.insert(m, field);
    }

    let mut out = RunOutput {
        report: RunReport {
            scenario: scenario.name.clone(),
            window_points: [window.nx, window.ny],
            exact: exact_report,
            region_probability: region_probability_map,
            methods: reports,
            total_seconds: 0.0,
            files: Vec::new(),
        },
        exact_full,
        exact,
        fields,
        complex_roots,
        real_roots,
    };
    if let Some(dir) = &opts.out_dir {
        out.report.files = write_outputs(&out, scenario, dir)?;
    }
    out.report.total_seconds = clock.elapsed().as_secs_f64();
    if let Some(dir) = &opts.out_dir {
        let path = dir.join("report.toml");
        std::fs::write(&path, out.report.to_toml()?)?;
    }
    Ok(out)
}

fn write_cut(
    path: &Path,
    fields: &[(String, &WaveField)],
    cut: &crate::scenarios::Cut,
) -> Result<()> {
    let cols: Vec<Vec<(f64, f64)>> = fields
        .iter()
        .map(|(_, f)| line_cut(f, cut.fixed, cut.value))
        .collect();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let along = match cut.fixed {
        crate::quantum::Axis::Y => "x",
        crate::quantum::Axis::X => "y",
    };
    let head: Vec<String> = fields.iter().map(|(n, _)| n.clone()).collect();
    writeln!(w, "{along},{}", head.join(","))?;
    for k in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| c[k].1.to_string()).collect();
        writeln!(w, "{},{}", cols[0][k].0, row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(out: &RunOutput, scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![dir.join("report.toml")];
    let exact_path = dir.join("exact.wf");
    out.exact.write_binary(&exact_path)?;
    files.push(exact_path);
    if scenario.output.csv {
        let p = dir.join("exact.csv");
        out.exact.write_csv(&p)?;
        files.push(p);
    }
    for (m, f) in &out.fields {
        let wf = dir.join(format!("{m}.wf"));
        let flags = dir.join(format!("{m}.flags"));
        f.field.write_binary(&wf)?;
        f.flags.write_binary(&flags)?;
        files.push(wf);
        files.push(flags);
        if scenario.output.csv {
            let p = dir.join(format!("{m}.csv"));
            f.field.write_csv(&p)?;
            files.push(p);
        }
    }
    // Cuts of the renormalised densities, so columns are comparable.
    let mut named: Vec<(String, WaveField)> = vec![("exact".into(), out.exact.normalized())];
    for (m, f) in &out.fields {
        named.push((m.name().into(), f.field.normalized()));
    }
    let refs: Vec<(String, &WaveField)> = named.iter().map(|(n, f)| (n.clone(), f)).collect();
    for cut in &scenario.output.cuts {
        let p = dir.join(format!("cut_{}.csv", cut.name));
        write_cut(&p, &refs, cut)?;
        files.push(p);
    }
    if scenario.output.debug_roots {
        if let Some(sweep) = &out.complex_roots {
            let p = dir.join("roots_sc.csv");
            let points: Vec<[f64; 2]> = (0..sweep.grid.len())
                .map(|i| sweep.grid.point_at(i))
                .collect();
            write_root_csv(&p, &points, &sweep.roots)?;
            files.push(p);
        }
        for (m, sweep) in &out.real_roots {
            let p = dir.join(format!("roots_{m}.csv"));
            write_real_roots(&p, sweep)?;
            files.push(p);
        }
    }
    if scenario.output.debug_trajectories {
        files.extend(write_trajectories(out, scenario, dir)?);
    }
    Ok(files)
}

fn write_real_roots(path: &Path, sweep: &SweepResult<RealRoot>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,family_id,u0,u1,maslov_count,re_det,im_det")?;
    for (i, cell) in sweep.roots.iter().enumerate() {
        let x = sweep.grid.point_at(i);
        for r in cell {
            let det = r.trajectory.prefactor_det();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                x[0],
                x[1],
                r.family_id,
                r.unknowns[0],
                r.unknowns[1],
                r.maslov_count,
                det.re,
                det.im
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Path dumps: the centre trajectory and the trajectories of every root found
/// at the window centre.
fn write_trajectories(out: &RunOutput, scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    if !scenario.potential.is_smooth() {
        return Ok(Vec::new());
    }
    let dir = dir.join("trajectories");
    std::fs::create_dir_all(&dir)?;
    let ham = scenario.hamiltonian();
    let params = &scenario.packet;
    let mut settings = scenario.shooting.integrator.clone();
    settings.record_path = true;
    let mut files = Vec::new();
    let mut dump = |name: String, start: ComplexPhasePoint| -> Result<()> {
        let tr = evolve(&start, scenario.time, &ham, params, &settings)
            .map_err(|e| shoot_err(e.into()))?;
        let p = dir.join(name);
        tr.write_csv(&p)?;
        files.push(p);
        Ok(())
    };
    dump(
        "centre.csv".into(),
        ComplexPhasePoint::real(params.q(), params.p()),
    )?;
    let mid = |g: &Grid| g.index(g.nx / 2, g.ny / 2);
    if let Some(sweep) = &out.complex_roots {
        for r in &sweep.roots[mid(&sweep.grid)] {
            dump(
                format!("sc_family{}.csv", r.family_id),
                crate::shooting::complex_start(params, &r.omega),
            )?;
        }
    }
    for (m, sweep) in &out.real_roots {
        for r in &sweep.roots[mid(&sweep.grid)] {
            let (x0, p0) = real_start(r.kind, params, &r.unknowns);
            dump(
                format!("{m}_family{}.csv", r.family_id),
                ComplexPhasePoint::real(&x0, &p0),
            )?;
        }
    }
    Ok(files)
}

/// Recompute a method's overlap from the files a run wrote.
pub fn overlap_from_files(dir: &Path, m: Method) -> Result<f64> {
    let exact = WaveField::read_binary(&dir.join("exact.wf"))?;
    let field = WaveField::read_binary(&dir.join(format!("{m}.wf")))?;
    let flags = crate::grid::FlagField::read_binary(&dir.join(format!("{m}.flags")))?;
    masked_overlap(&exact, &EstimatorField { field, flags })
}

/// Plain overlap of two normalised fields, exposed for callers comparing runs.
pub fn field_overlap(a: &WaveField, b: &WaveField) -> Result<f64> {
    normalized_overlap(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::preset;

    fn small(name: &str, n: usize) -> Scenario {
        let mut s = preset(name).unwrap();
        s.grid = s.grid.with_window_points(n);
        s
    }

    #[test]
    fn free_run_is_exact_for_every_method() {
        let s = small("free_test", 48);
        let out = run(&s, &RunOptions::default()).unwrap();
        assert_eq!(out.report.methods.len(), 5);
        for m in &out.report.methods {
            assert!(m.overlap > 1.0 - 1e-6, "{:?}: {}", m.method, m.overlap);
        }
        assert!(out.report.exact.norm_drift < 1e-10);
    }

    #[test]
    fn written_files_reproduce_the_report() {
        let mut s = small("harmonic_test", 32);
        s.methods = vec![Method::Exact, Method::Sc, Method::Q];
        s.output.csv = true;
        s.output.debug_roots = true;
        s.output.debug_trajectories = true;
        s.output.cuts.push(crate::scenarios::Cut {
            name: "mid".into(),
            fixed: crate::quantum::Axis::X,
            value: 0.0,
        });
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            progress: false,
        };
        let out = run(&s, &opts).unwrap();
        for f in &out.report.files {
            assert!(f.exists(), "{}", f.display());
        }
        for m in [Method::Sc, Method::Q] {
            let again = overlap_from_files(dir.path(), m).unwrap();
            assert!((again - out.report.method(m).unwrap().overlap).abs() < 1e-12);
        }
        let text = std::fs::read_to_string(dir.path().join("report.toml")).unwrap();
        let back = RunReport::from_toml(&text).unwrap();
        assert_eq!(back.methods.len(), 2);
        assert!(dir.path().join("trajectories/centre.csv").exists());
        assert!(out.report.table().contains("sc"));
    }
}
