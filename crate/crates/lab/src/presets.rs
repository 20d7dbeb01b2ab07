//! Named experiment presets. Each is a complete configuration; user files and
//! overrides are layered on top.

use crate::config::{
    ConvolutionSection, DampingSection, DataSection, FitSection, GasSection, GridSection, LinearSection, OutputSection,
    ScenarioConfig, SnapshotFormat, SolverSection, SplitChoice,
};
use crate::diagnostic::Kind;
use crate::error::{LabError, Result};

/// Preset names with a one-line description, in catalog order.
pub const CATALOG: &[(&str, &str)] = &[
    ("linear-decay", "sup-norm decay of K1 * g and its first derivative, 1-D"),
    ("zone-bounds", "fundamental solutions against their zone envelopes"),
    ("zone-integrals", "L1 integrals of |xi|^a Phi1 over the low-frequency zone"),
    ("nonlinear-decay", "density and velocity decay of a small bump, 1-D"),
    ("u-extra-lambda", "velocity lags density by the (1+t)^lambda factor"),
    ("mass-conservation", "discrete conservation of the excess mass"),
    ("lower-bound", "moment inequality and lower-bound margins for positive mass"),
    ("vorticity-2d", "stretched-exponential vorticity decay on a 2-D grid"),
    ("vorticity-3d", "vorticity decay on a small 3-D grid"),
    ("q-decay", "decay and eps^2 scaling of the nonlinear source Q"),
    ("convolution-lemma", "boundedness of the time-convolution integral"),
    ("weighted-energy-bounded", "boundedness of the weighted energies"),
    ("blowup-scout", "large-data run watched by the gradient blow-up monitor"),
];

pub fn kind_of(name: &str) -> Result<Kind> {
    Ok(match name {
        "linear-decay" => Kind::KernelDecay,
        "zone-bounds" => Kind::ZoneBounds,
        "zone-integrals" => Kind::ZoneIntegrals,
        "convolution-lemma" => Kind::Convolution,
        "nonlinear-decay"
        | "u-extra-lambda"
        | "mass-conservation"
        | "lower-bound"
        | "vorticity-2d"
        | "vorticity-3d"
        | "q-decay"
        | "weighted-energy-bounded"
        | "blowup-scout" => Kind::Solver,
        other => return Err(LabError::UnknownScenario(other.to_string())),
    })
}

fn base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        scenario: name.to_string(),
        n: 1,
        delta: None,
        seed: 0,
        diagnostics: Vec::new(),
        damping: DampingSection { lambda: 0.5, mu: 1.0 },
        gas: GasSection { gamma: 2.0 },
        grid: GridSection { half_length: None, points: Some(2048), margin: 2.0 },
        data: DataSection {
            radius: 10.0,
            eps: 1e-3,
            q0: None,
            order: None,
            density: 1.0,
            velocity: [0.0; 3],
            potential: 0.0,
            swirl: 0.0,
            lobe: false,
        },
        solver: SolverSection {
            cfl: 0.4,
            dealias: true,
            t_final: 1000.0,
            hyperviscosity: 0.0,
            damping_split: SplitChoice::Plain,
            fixed_dt: None,
            early_interval: 0.05,
            log_samples: 40,
            moment_interval: None,
            norm_order: 1,
            blowup_gradient_factor: 100.0,
            blowup_tail_fraction: 0.01,
            blowup_interval: 10,
        },
        fit: FitSection { window: [100.0, 1000.0], margin_start: 20.0 },
        linear: LinearSection {
            rtol: 1e-10,
            samples: 25,
            cutoff: None,
            zone_times: vec![10.0, 100.0, 1000.0],
            c0: 1.0,
            zone_resolution: 24,
            zone_t_final: 100.0,
        },
        convolution: ConvolutionSection {
            pairs: vec![[2.0, 1.0], [1.5, 1.5], [3.0, 0.5]],
            times: vec![1.0, 10.0, 100.0, 1000.0],
            extended: 1e4,
        },
        output: OutputSection { dir: "runs".into(), snapshots: SnapshotFormat::None, snapshot_count: 4 },
    }
}

fn diags(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    kind_of(name)?;
    let mut c = base(name);
    match name {
        "linear-decay" => {
            c.damping.mu = 4.0;
            c.data.radius = 5.0;
            c.grid.points = None;
            c.fit.window = [1e2, 1e4];
            c.diagnostics = diags(&["kernel-decay-k0", "kernel-decay-k1"]);
        }
        "zone-bounds" => {
            c.damping.mu = 2.0;
            c.diagnostics = diags(&["zone-bound-z1", "zone-bound-z2", "zone-bound-z3"]);
        }
        "zone-integrals" => {
            c.damping.mu = 2.0;
            c.diagnostics = diags(&["zone-integral-a0", "zone-integral-a2", "zone-integral-gap"]);
        }
        "nonlinear-decay" => {
            c.diagnostics = diags(&[
                "rho-linf-slope",
                "u-linf-slope",
                "slope-difference",
                "low-energy-bounded",
                "high-energy-bounded",
                "mass-drift",
            ]);
            c.output.snapshots = SnapshotFormat::Binary;
        }
        "u-extra-lambda" => {
            c.diagnostics = diags(&["u-linf-slope", "slope-difference"]);
        }
        "q-decay" => {
            c.diagnostics = diags(&["q-decay", "q-eps-scaling"]);
        }
        "weighted-energy-bounded" => {
            c.diagnostics = diags(&["low-energy-bounded", "high-energy-bounded", "weighted-energy-bounded"]);
        }
        "mass-conservation" => {
            c.data.q0 = Some(0.01);
            c.solver.t_final = 200.0;
            c.grid.points = Some(512);
            c.fit.window = [20.0, 200.0];
            c.diagnostics = diags(&["mass-drift"]);
        }
        "lower-bound" => {
            c.data.q0 = Some(0.01);
            c.solver.t_final = 200.0;
            c.solver.moment_interval = Some(0.25);
            c.grid.points = Some(512);
            c.fit.window = [20.0, 200.0];
            c.diagnostics = diags(&["mass-drift", "cauchy-schwarz", "moment-inequality", "margin-rho", "margin-u"]);
        }
        "vorticity-2d" => {
            c.n = 2;
            c.grid.points = Some(256);
            c.data.radius = 8.0;
            c.data.density = 0.0;
            c.data.swirl = 1.0;
            c.solver.t_final = 60.0;
            c.solver.log_samples = 30;
            c.fit.window = [2.0, 60.0];
            c.diagnostics = diags(&["vorticity-decay", "irrotational"]);
        }
        "vorticity-3d" => {
            c.n = 3;
            c.grid.points = Some(64);
            c.data.radius = 9.0;
            c.data.density = 0.0;
            c.data.swirl = 1.0;
            c.solver.t_final = 10.0;
            c.solver.log_samples = 20;
            c.fit.window = [1.0, 10.0];
            c.diagnostics = diags(&["vorticity-decay", "irrotational"]);
        }
        "convolution-lemma" => {
            c.diagnostics = diags(&["convolution-a2-b1", "convolution-a1.5-b1.5", "convolution-a3-b0.5"]);
        }
        "blowup-scout" => {
            c.damping.lambda = 0.8;
            c.data.eps = 0.5;
            c.grid.points = Some(1024);
            c.solver.t_final = 100.0;
            c.fit.window = [10.0, 100.0];
            c.diagnostics = diags(&["blowup"]);
        }
        _ => {}
    }
    Ok(c)
}
