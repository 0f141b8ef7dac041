//! Scenario-level acceptance checks. Prints one PASS/FAIL line per criterion.
//! Failures are reported but only fail the process when
//! `SCWAVE_ACCEPTANCE_STRICT=1`.

use std::collections::BTreeMap;
use std::time::Instant;

use scwave::quantum::{line_cut, Axis};
use scwave::runner::{run, RunOptions, RunOutput};
use scwave::scenarios::{preset, Method, Scenario};
use scwave::verify::{run_checks, VerifyOptions};
use scwave::{CellFlags, PotentialSpec};

struct Verdict {
    passed: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.passed &= ok;
        self.lines
            .push(format!("{} {what}", if ok { "ok  " } else { "MISS" }));
    }

    fn within(&mut self, what: &str, v: f64, lo: f64, hi: f64) {
        self.check(
            (lo..=hi).contains(&v),
            format!("{what} = {v:.5} (want [{lo}, {hi}])"),
        );
    }
}

fn execute(s: &Scenario) -> RunOutput {
    let t = Instant::now();
    let out = run(s, &RunOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", s.name));
    eprintln!(
        "  ran {} at {:?} in {:.0}s",
        s.name,
        out.report.window_points,
        t.elapsed().as_secs_f64()
    );
    out
}

fn overlap(out: &RunOutput, m: Method) -> f64 {
    out.report.method(m).unwrap().overlap
}

/// Local maxima of `d` whose prominence exceeds `min_prominence`: the drop
/// to the higher of the two lowest points separating it from taller maxima
/// (or the ends).
fn prominent_maxima(d: &[f64], min_prominence: f64) -> Vec<usize> {
    let base = |k: usize, side: &mut dyn Iterator<Item = usize>| {
        let mut low = d[k];
        for j in side {
            if d[j] > d[k] {
                break;
            }
            low = low.min(d[j]);
        }
        low
    };
    (1..d.len() - 1)
        .filter(|&k| d[k] > d[k - 1] && d[k] >= d[k + 1])
        .filter(|&k| d[k] - base(k, &mut (0..k).rev()).max(base(k, &mut (k + 1..d.len()))) > min_prominence)
        .collect()
}

/// Maxima of a `y = 0` cut between the first significant peak at `x > 0` and
/// the wall at `wall`. Grid-scale ripple from the steep wall is not counted.
fn fringes(cut: &[(f64, f64)], wall: f64) -> (Option<f64>, usize) {
    let (x, d): (Vec<f64>, Vec<f64>) = cut.iter().copied().unzip();
    let top = d.iter().copied().fold(0.0, f64::max);
    let peaks: Vec<usize> = prominent_maxima(&d, 0.02 * top).into_iter().filter(|&k| x[k] > 0.0 && x[k] < wall).collect();
    let Some(&main) = peaks.iter().find(|&&k| d[k] > 0.1 * top) else {
        return (None, 0);
    };
    (Some(x[main]), peaks.iter().filter(|&&k| k > main).count())
}

fn criterion_1(gw: &RunOutput) -> Verdict {
    let mut v = Verdict::new();
    let sc = overlap(gw, Method::Sc);
    v.within("overlap(exact, sc)", sc, 0.89, 0.95);
    for m in [Method::Q, Method::P, Method::Mixed] {
        let o = overlap(gw, m);
        v.check(
            (o - sc).abs() <= 0.03,
            format!("|overlap {m} - sc| = {:.5} ({m} {o:.5})", (o - sc).abs()),
        );
    }
    v
}

fn criterion_2(q: &RunOutput) -> Verdict {
    let mut v = Verdict::new();
    v.within("overlap(exact, sc)", overlap(q, Method::Sc), 0.92, 0.98);
    let flags = &q.fields[&Method::Q].flags;
    let bad = flags.count(CellFlags::UNREACHABLE) + flags.count(CellFlags::CAUSTIC);
    let frac = bad as f64 / flags.grid.len() as f64;
    v.check(
        frac > 0.05,
        format!("q flagged cells {:.1}% (want > 5%)", 100.0 * frac),
    );

    let cut = line_cut(&q.exact, Axis::Y, 0.0);
    let (x, d): (Vec<f64>, Vec<f64>) = cut.into_iter().unzip();
    let slope: Vec<f64> = (0..d.len() - 1).map(|k| d[k + 1] - d[k]).collect();
    let mid = |k: usize| 0.5 * (x[k] + x[k + 1]);
    let shoulder = (1..slope.len() - 1)
        .find(|&k| (-2.0..=-1.0).contains(&mid(k)) && slope[k] > 0.0 && slope[k] < slope[k - 1] && slope[k] <= slope[k + 1]);
    let peak = prominent_maxima(&d, 0.0).into_iter().find(|&k| (-2.0..=-1.0).contains(&x[k]));
    v.check(
        shoulder.is_some() || peak.is_some(),
        match (peak, shoulder) {
            (Some(k), _) => format!("exact y=0 cut has a local max at x = {:.3}", x[k]),
            (None, Some(k)) => format!("exact y=0 cut: rising slope has a local minimum at x = {:.3}", mid(k)),
            _ => "no shoulder in x in [-2, -1]".into(),
        },
    );
    v
}

fn criterion_3(b: &RunOutput, scenario: &Scenario) -> Verdict {
    let mut v = Verdict::new();
    let q = overlap(b, Method::Q);
    v.within("overlap(exact, q)", q, 0.95, 0.99);
    let fam = &b.report.method(Method::Q).unwrap().families;
    v.check(
        fam.max_roots <= 3,
        format!(
            "at most direct + two one-bounce roots per cell ({})",
            fam.max_roots
        ),
    );

    let PotentialSpec::Billiard { radius, .. } = scenario.potential else {
        unreachable!()
    };
    let (peak, n) = fringes(&line_cut(&b.exact, Axis::Y, 0.0), radius);
    v.check(
        n >= 2,
        format!("exact y=0 cut: {n} maxima between the main peak (x = {peak:.2?}) and the wall"),
    );
    let (_, nq) = fringes(&line_cut(&b.fields[&Method::Q].field, Axis::Y, 0.0), radius);
    v.check(nq.abs_diff(n) <= 1, format!("q y=0 cut: {nq} maxima"));

    let mut soft = scenario.clone();
    if let PotentialSpec::Billiard { wall_width, .. } = &mut soft.potential {
        *wall_width *= 2.0;
    }
    let q_soft = overlap(&execute(&soft), Method::Q);
    v.check(
        (q_soft - q).abs() < 0.01,
        format!(
            "wall width doubled: overlap {q_soft:.5}, shift {:.5}",
            (q_soft - q).abs()
        ),
    );
    v
}

fn criterion_4(r: &RunOutput) -> Verdict {
    let mut v = Verdict::new();
    v.within(
        "exact P(r < r0)",
        r.report.region_probability["transmitted"],
        0.08,
        0.12,
    );
    let region = |m| r.report.method(m).unwrap().region_overlap["transmitted"];
    v.within(
        "transmitted overlap(exact, q)",
        region(Method::Q),
        0.91,
        0.97,
    );
    let p = region(Method::P);
    v.check(
        p < 0.5,
        format!("transmitted overlap(exact, p) = {p:.5} (want < 0.5)"),
    );
    v
}

/// Every reported overlap at half resolution against the default run.
fn reported(out: &RunOutput) -> BTreeMap<String, f64> {
    let mut all = BTreeMap::new();
    for m in &out.report.methods {
        all.insert(m.method.to_string(), m.overlap);
        for (name, o) in &m.region_overlap {
            all.insert(format!("{}:{name}", m.method), *o);
        }
    }
    all
}

fn criterion_5(runs: &[(Scenario, &RunOutput)]) -> Verdict {
    let mut v = Verdict::new();
    for r in run_checks(&VerifyOptions::default()) {
        v.check(r.passed, format!("{}: {}", r.name, r.detail));
    }
    for (s, full) in runs {
        let mut coarse = s.clone();
        coarse.grid.points = s.grid.points.map(|n| n / 2);
        let half = reported(&execute(&coarse));
        let worst = reported(full)
            .into_iter()
            .map(|(k, o)| (k.clone(), (o - half[&k]).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        v.check(
            worst.1 < 0.002,
            format!(
                "{} grid doubling: max overlap change {:.5} ({})",
                s.name, worst.1, worst.0
            ),
        );
    }
    v
}

fn criterion_6(gw: &RunOutput) -> Verdict {
    let mut v = Verdict::new();
    let exact = gw.exact.density();
    let sc = gw.fields[&Method::Sc].field.density();
    let top = |d: &[f64]| d.iter().copied().fold(0.0, f64::max);
    v.within(
        "sc main peak / exact peak",
        top(&sc) / top(&exact),
        1.5,
        2.5,
    );

    // Secondary peak: exact maximum in the band |y - 2| <= 0.5, compared at
    // every cell within 0.5 of it where the exact density is at least half of it.
    let grid = gw.exact.grid;
    let band: Vec<usize> = (0..grid.len())
        .filter(|&i| (grid.point_at(i)[1] - 2.0).abs() <= 0.5)
        .collect();
    let k = *band
        .iter()
        .max_by(|&&a, &&b| exact[a].total_cmp(&exact[b]))
        .unwrap();
    let c = grid.point_at(k);
    let worst = (0..grid.len())
        .filter(|&i| {
            let x = grid.point_at(i);
            (x[0] - c[0]).hypot(x[1] - c[1]) <= 0.5 && exact[i] >= 0.5 * exact[k]
        })
        .map(|i| (sc[i] / exact[i] - 1.0).abs())
        .fold(0.0, f64::max);
    v.check(
        worst < 0.1,
        format!(
            "secondary peak at ({:.2}, {:.2}): max relative error {worst:.4}",
            c[0], c[1]
        ),
    );
    v
}

fn main() {
    let t = Instant::now();
    let names = ["gaussian_well", "quartic", "billiard", "ridge"];
    let scenarios: Vec<Scenario> = names.iter().map(|n| preset(n).unwrap()).collect();
    let outs: Vec<RunOutput> = scenarios.iter().map(execute).collect();

    let verdicts = [
        ("gaussian well overlaps", criterion_1(&outs[0])),
        ("quartic oscillator", criterion_2(&outs[1])),
        ("circular billiard", criterion_3(&outs[2], &scenarios[2])),
        ("tunnelling ridge", criterion_4(&outs[3])),
        (
            "property suite",
            criterion_5(
                &scenarios
                    .iter()
                    .cloned()
                    .zip(outs.iter())
                    .collect::<Vec<_>>(),
            ),
        ),
        ("main-family peak defect", criterion_6(&outs[0])),
    ];

    let mut failed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        println!(
            "{} criterion {}: {name}",
            if v.passed { "PASS" } else { "FAIL" },
            k + 1
        );
        for l in &v.lines {
            println!("    {l}");
        }
        failed += usize::from(!v.passed);
    }
    println!(
        "{} of {} criteria passed ({:.0}s)",
        verdicts.len() - failed,
        verdicts.len(),
        t.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("SCWAVE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
