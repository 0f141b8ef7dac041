//! Declarative scenarios: the four applications, two quadratic test cases,
//! and the TOML config format they round-trip through.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Hamiltonian;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potentials::PotentialSpec;
use crate::quantum::Axis;
use crate::semiclassical::AssemblySettings;
use crate::shooting::ShootingSettings;
use crate::wavepacket::WavepacketParams;

pub const PRESETS: [&str; 6] = [
    "gaussian_well",
    "quartic",
    "billiard",
    "ridge",
    "free_test",
    "harmonic_test",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Split-operator reference.
    Exact,
    /// Complex trajectories.
    Sc,
    /// Thawed Gaussian.
    Tga,
    /// Real trajectories, fixed initial position.
    Q,
    /// Real trajectories, fixed initial momentum.
    P,
    /// Real trajectories, mixed conditions.
    Mixed,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Exact,
        Method::Sc,
        Method::Tga,
        Method::Q,
        Method::P,
        Method::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Sc => "sc",
            Method::Tga => "tga",
            Method::Q => "q",
            Method::P => "p",
            Method::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected one of exact, sc, tga, q, p, mixed)"
                ))
            })
    }
}

/// Periodic propagation domain and the output window inside it. Semiclassical
/// estimators are evaluated on the window nodes only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub points: [usize; 2],
    pub window_x: [f64; 2],
    pub window_y: [f64; 2],
    /// Nominal time step of the exact propagation.
    pub dt: f64,
}

impl GridSpec {
    pub fn full(&self) -> Result<Grid> {
        Grid::periodic(self.x, self.y, self.points[0], self.points[1])
    }

    pub fn window(&self) -> Result<(Grid, [usize; 2])> {
        self.full()?.window(self.window_x, self.window_y)
    }

    /// Rescale the resolution so that the window has about `n` nodes per axis.
    pub fn with_window_points(&self, n: usize) -> GridSpec {
        let per_axis = |full: [f64; 2], win: [f64; 2]| {
            let m = (n as f64 * (full[1] - full[0]) / (win[1] - win[0])).round() as usize;
            m.max(2).next_multiple_of(2)
        };
        GridSpec {
            points: [
                per_axis(self.x, self.window_x),
                per_axis(self.y, self.window_y),
            ],
            ..self.clone()
        }
    }
}

/// A region of the plane used for restricted overlaps and probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RegionShape {
    Disk { centre: [f64; 2], radius: f64 },
    Outside { centre: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    #[serde(flatten)]
    pub shape: RegionShape,
}

impl Region {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self.shape {
            RegionShape::Disk { centre, radius } => {
                (x[0] - centre[0]).hypot(x[1] - centre[1]) < radius
            }
            RegionShape::Outside { centre, radius } => {
                (x[0] - centre[0]).hypot(x[1] - centre[1]) > radius
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cut {
    pub name: String,
    /// The coordinate held fixed.
    pub fixed: Axis,
    pub value: f64,
}

/// Extra starting point for a real-root sweep: seeds along the segment
/// `from -> to` are tried at the window node nearest `at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedLine {
    pub at: [f64; 2],
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub count: usize,
}

impl SeedLine {
    pub fn seeds(&self) -> Vec<Vec<f64>> {
        let n = self.count.max(1);
        (0..n)
            .map(|k| {
                let s = if n == 1 {
                    0.0
                } else {
                    k as f64 / (n - 1) as f64
                };
                self.from
                    .iter()
                    .zip(&self.to)
                    .map(|(a, b)| a + s * (b - a))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Families {
    /// Continue only the family through `omega = 0`.
    #[default]
    Main,
    /// Enumerate families at the anchor node and continue all of them.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct RootSpec {
    pub families: Families,
    pub q_anchors: Vec<SeedLine>,
    pub p_anchors: Vec<SeedLine>,
    pub mixed_anchors: Vec<SeedLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct OutputSpec {
    pub csv: bool,
    pub cuts: Vec<Cut>,
    pub regions: Vec<Region>,
    pub debug_trajectories: bool,
    pub debug_roots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialSpec,
    #[serde(default = "unit")]
    pub mass: f64,
    pub packet: WavepacketParams,
    pub time: f64,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    #[serde(default)]
    pub roots: RootSpec,
    #[serde(default)]
    pub shooting: ShootingSettings,
    #[serde(default)]
    pub assembly: AssemblySettings,
    #[serde(default)]
    pub output: OutputSpec,
}

fn unit() -> f64 {
    1.0
}

impl Scenario {
    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian {
            potential: self.potential.clone(),
            mass: self.mass,
        }
    }

    /// Methods in canonical order, always including the exact reference.
    pub fn method_set(&self) -> Vec<Method> {
        let mut s: BTreeSet<Method> = self.methods.iter().copied().collect();
        s.insert(Method::Exact);
        s.into_iter().collect()
    }

    fn incompatible(&self, m: Method, reason: &str) -> Error {
        Error::Incompatible {
            method: m.name().into(),
            scenario: self.name.clone(),
            reason: reason.into(),
        }
    }

    /// Reject inconsistent settings before any computation.
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if self.packet.dim() != 2 {
            return Err(Error::Config("scenarios are two-dimensional".into()));
        }
        if !(self.time > 0.0 && self.time.is_finite()) {
            return Err(Error::Config(format!(
                "time must be positive, got {}",
                self.time
            )));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.grid.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.grid.dt
            )));
        }
        self.grid.window()?;
        self.shooting.integrator.validate()?;
        let billiard = matches!(self.potential, PotentialSpec::Billiard { .. });
        for &m in &self.methods {
            match m {
                Method::Sc | Method::Tga if !self.potential.is_smooth() => {
                    return Err(
                        self.incompatible(m, "needs a potential with an analytic continuation")
                    )
                }
                Method::P | Method::Mixed if billiard => {
                    return Err(self.incompatible(
                        m,
                        "the billiard is solved analytically only for a fixed initial position",
                    ))
                }
                Method::Q if billiard && self.packet.q().iter().any(|v| v.abs() > 1e-12) => {
                    return Err(
                        self.incompatible(m, "billiard trajectories must start at the disk centre")
                    )
                }
                _ => {}
            }
        }
        for a in self
            .roots
            .q_anchors
            .iter()
            .chain(&self.roots.p_anchors)
            .chain(&self.roots.mixed_anchors)
        {
            if a.from.len() != 2 || a.to.len() != 2 {
                return Err(Error::Config("anchor seeds need two components".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn packet(q: [f64; 2], p: [f64; 2], b: [f64; 2]) -> WavepacketParams {
    WavepacketParams::new(q.to_vec(), p.to_vec(), b.to_vec(), 1.0).expect("preset packet is valid")
}

fn y_cut() -> Cut {
    Cut {
        name: "y0".into(),
        fixed: Axis::Y,
        value: 0.0,
    }
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Named scenario with the parameters of the corresponding application.
pub fn preset(name: &str) -> Result<Scenario> {
    let s = match name {
        "gaussian_well" => Scenario {
            name: name.into(),
            potential: PotentialSpec::gaussian_well(),
            mass: 1.0,
            packet: packet([-10.0, 1.0], [3.0, 0.0], [1.0, 1.0]),
            time: 4.0,
            methods: all_methods(),
            grid: GridSpec {
                x: [-24.0, 24.0],
                y: [-24.0, 24.0],
                points: [384, 384],
                window_x: [-14.0, 18.0],
                window_y: [-16.0, 16.0],
                dt: 4.0 / 2000.0,
            },
            roots: RootSpec::default(),
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec {
                cuts: vec![y_cut()],
                ..OutputSpec::default()
            },
        },
        "quartic" => Scenario {
            name: name.into(),
            potential: PotentialSpec::Quartic { a: 0.5, b_q: 0.1 },
            mass: 1.0,
            packet: packet([0.0, 0.0], [2.0, 0.0], [1.0, 1.0]),
            time: 2.4,
            methods: all_methods(),
            grid: GridSpec {
                x: [-8.0, 8.0],
                y: [-8.0, 8.0],
                points: [320, 320],
                window_x: [-5.0, 5.0],
                window_y: [-5.0, 5.0],
                dt: 2.4 / 2000.0,
            },
            roots: RootSpec::default(),
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec {
                cuts: vec![y_cut()],
                ..OutputSpec::default()
            },
        },
        "billiard" => Scenario {
            name: name.into(),
            potential: PotentialSpec::billiard(3.0),
            mass: 1.0,
            packet: packet([0.0, 0.0], [4.0, 0.0], [1.0, 1.0]),
            time: 0.5,
            methods: vec![Method::Exact, Method::Q],
            grid: GridSpec {
                x: [-3.6, 3.6],
                y: [-3.6, 3.6],
                points: [384, 384],
                window_x: [-3.1, 3.1],
                window_y: [-3.1, 3.1],
                dt: 0.5 / 16000.0, // steep wall: coarser steps miss 1e-8 dt convergence
            },
            roots: RootSpec::default(),
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec {
                cuts: vec![y_cut()],
                regions: vec![Region {
                    name: "beyond_wall".into(),
                    shape: RegionShape::Outside {
                        centre: [0.0, 0.0],
                        radius: 3.1,
                    },
                }],
                ..OutputSpec::default()
            },
        },
        "ridge" => Scenario {
            name: name.into(),
            potential: PotentialSpec::Ridge {
                v0: 10.0,
                r0: 5.0,
                sigma: 10.0,
            },
            mass: 1.0,
            packet: packet([-10.0, 0.0], [4.0, 0.0], [1.0, 1.0]),
            time: 2.5,
            methods: vec![Method::Exact, Method::Q, Method::P],
            grid: GridSpec {
                x: [-26.0, 14.0],
                y: [-20.0, 20.0],
                points: [400, 400],
                window_x: [-18.0, 8.0],
                window_y: [-13.0, 13.0],
                dt: 2.5 / 2000.0,
            },
            roots: RootSpec {
                q_anchors: vec![SeedLine {
                    at: [0.0, 0.0],
                    from: vec![4.0, 0.0],
                    to: vec![10.0, 0.0],
                    count: 25,
                }],
                p_anchors: vec![SeedLine {
                    at: [0.0, 0.0],
                    from: vec![-10.0, 0.0],
                    to: vec![-2.0, 0.0],
                    count: 33,
                }],
                ..RootSpec::default()
            },
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec {
                cuts: vec![y_cut()],
                regions: vec![Region {
                    name: "transmitted".into(),
                    shape: RegionShape::Disk {
                        centre: [0.0, 0.0],
                        radius: 5.0,
                    },
                }],
                ..OutputSpec::default()
            },
        },
        "free_test" => Scenario {
            name: name.into(),
            potential: PotentialSpec::Free,
            mass: 1.0,
            packet: packet([-1.0, 0.5], [1.0, -0.5], [1.0, 1.0]),
            time: 1.0,
            methods: all_methods(),
            grid: GridSpec {
                x: [-12.0, 12.0],
                y: [-12.0, 12.0],
                points: [128, 128],
                window_x: [-8.0, 8.0],
                window_y: [-8.0, 8.0],
                dt: 1.0 / 200.0,
            },
            roots: RootSpec::default(),
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec::default(),
        },
        "harmonic_test" => Scenario {
            name: name.into(),
            potential: PotentialSpec::Harmonic {
                omega: vec![1.0, 1.3],
            },
            mass: 1.0,
            packet: packet([1.0, -0.5], [0.5, 1.0], [0.8, 1.25]),
            time: 1.2,
            methods: all_methods(),
            grid: GridSpec {
                x: [-10.0, 10.0],
                y: [-10.0, 10.0],
                points: [128, 128],
                window_x: [-6.0, 6.0],
                window_y: [-6.0, 6.0],
                dt: 1.2 / 2000.0,
            },
            roots: RootSpec::default(),
            shooting: ShootingSettings::default(),
            assembly: AssemblySettings::default(),
            output: OutputSpec::default(),
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.into(),
                available: PRESETS.join(", "),
            })
        }
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn presets_carry_application_parameters() {
        assert_eq!(preset("gaussian_well").unwrap().time, 4.0);
        assert_eq!(
            preset("quartic").unwrap().potential,
            PotentialSpec::Quartic { a: 0.5, b_q: 0.1 }
        );
        let b = preset("billiard").unwrap();
        assert_eq!(b.methods, vec![Method::Exact, Method::Q]);
        assert_eq!(b.packet.p(), &[4.0, 0.0]);
        let r = preset("ridge").unwrap();
        assert_eq!(r.packet.q(), &[-10.0, 0.0]);
        assert_eq!(r.time, 2.5);
        let f = preset("free_test").unwrap();
        assert_eq!(f.potential, PotentialSpec::Free);
        assert_eq!(f.method_set(), Method::ALL.to_vec());
    }

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            s.validate().unwrap();
            let text = s.to_toml().unwrap();
            assert_eq!(Scenario::from_toml(&text).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn unknown_preset_lists_available() {
        let e = preset("nope").unwrap_err().to_string();
        assert!(e.contains("gaussian_well") && e.contains("ridge"));
    }

    #[test]
    fn incompatible_methods_are_rejected() {
        let mut s = preset("billiard").unwrap();
        s.methods.push(Method::Sc);
        assert!(matches!(s.validate(), Err(Error::Incompatible { .. })));
        let mut s = preset("billiard").unwrap();
        s.methods = vec![Method::P];
        assert!(matches!(s.validate(), Err(Error::Incompatible { .. })));
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut text = preset("quartic").unwrap().to_toml().unwrap();
        text = text.replace("time = 2.4", "time = \"soon\"");
        let e = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("time"), "{e}");
    }

    #[test]
    fn windows_lie_inside_the_propagation_domain() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            let (w, off) = s.grid.window().unwrap();
            let full = s.grid.full().unwrap();
            assert!(off[0] + w.nx <= full.nx && off[1] + w.ny <= full.ny);
            let rescaled = s.grid.with_window_points(64);
            let (w2, _) = rescaled.window().unwrap();
            assert!((w2.nx as i64 - 64).abs() <= 4, "{name}: {}", w2.nx);
        }
    }

    #[test]
    fn methods_parse_from_names() {
        assert_eq!("mixed".parse::<Method>().unwrap(), Method::Mixed);
        assert!("fft".parse::<Method>().is_err());
    }

    fn arb_spec() -> impl Strategy<Value = PotentialSpec> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|depth| PotentialSpec::GaussianWell { depth }),
            (0.0f64..2.0, 0.0f64..1.0).prop_map(|(a, b_q)| PotentialSpec::Quartic { a, b_q }),
            (0.5f64..20.0, 0.5f64..8.0, 0.5f64..20.0)
                .prop_map(|(v0, r0, sigma)| PotentialSpec::Ridge { v0, r0, sigma }),
            (0.1f64..3.0, 0.1f64..3.0)
                .prop_map(|(a, b)| PotentialSpec::Harmonic { omega: vec![a, b] }),
            Just(PotentialSpec::Free),
        ]
    }

    proptest! {
        #[test]
        fn arbitrary_scenarios_round_trip(
            spec in arb_spec(),
            q in prop::array::uniform2(-5.0f64..5.0),
            p in prop::array::uniform2(-3.0f64..3.0),
            b in prop::array::uniform2(0.3f64..2.0),
            t in 0.1f64..5.0,
            csv in any::<bool>(),
        ) {
            let mut s = preset("free_test").unwrap();
            s.potential = spec;
            s.packet = packet(q, p, b);
            s.time = t;
            s.output.csv = csv;
            let back = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
