//! Registry of selectable diagnostics. Each one yields exactly one verdict.

use tdeuler::params::Zone;

/// Which engine a scenario drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    KernelDecay,
    ZoneBounds,
    ZoneIntegrals,
    Solver,
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostic {
    /// Sup-norm decay slope of `∂^k(K₁ ∗ g)`.
    KernelDecay {
        k: u32,
    },
    /// Stability of the fitted envelope constant under sample refinement.
    ZoneBound(Zone),
    /// Spread of the `Z1` integral ratio to its envelope across sample times.
    ZoneIntegral {
        alpha: u32,
    },
    /// Exponent gap between `alpha = 2` and `alpha = 0`.
    ZoneIntegralGap,
    RhoSlope,
    USlope,
    /// `ρ` slope minus `u` slope.
    SlopeDifference,
    LowEnergy,
    HighEnergy,
    WeightedEnergy,
    QDecay,
    /// `‖Q‖₁` ratio under doubling of `eps`.
    QScaling,
    MassDrift,
    CauchySchwarz,
    MomentInequality,
    MarginRho,
    MarginU,
    VorticityDecay,
    Irrotational,
    Blowup,
    Convolution {
        a: f64,
        b: f64,
    },
}

fn zone_from(s: &str) -> Option<Zone> {
    match s {
        "z1" => Some(Zone::Z1),
        "z2" => Some(Zone::Z2),
        "z3" => Some(Zone::Z3),
        _ => None,
    }
}

impl Diagnostic {
    pub fn parse(name: &str) -> Option<Self> {
        use Diagnostic::*;
        let fixed = match name {
            "zone-integral-gap" => Some(ZoneIntegralGap),
            "rho-linf-slope" => Some(RhoSlope),
            "u-linf-slope" => Some(USlope),
            "slope-difference" => Some(SlopeDifference),
            "low-energy-bounded" => Some(LowEnergy),
            "high-energy-bounded" => Some(HighEnergy),
            "weighted-energy-bounded" => Some(WeightedEnergy),
            "q-decay" => Some(QDecay),
            "q-eps-scaling" => Some(QScaling),
            "mass-drift" => Some(MassDrift),
            "cauchy-schwarz" => Some(CauchySchwarz),
            "moment-inequality" => Some(MomentInequality),
            "margin-rho" => Some(MarginRho),
            "margin-u" => Some(MarginU),
            "vorticity-decay" => Some(VorticityDecay),
            "irrotational" => Some(Irrotational),
            "blowup" => Some(Blowup),
            _ => None,
        };
        if fixed.is_some() {
            return fixed;
        }
        if let Some(k) = name.strip_prefix("kernel-decay-k") {
            return k.parse().ok().map(|k| KernelDecay { k });
        }
        if let Some(z) = name.strip_prefix("zone-bound-") {
            return zone_from(z).map(ZoneBound);
        }
        if let Some(a) = name.strip_prefix("zone-integral-a") {
            return a.parse().ok().map(|alpha| ZoneIntegral { alpha });
        }
        if let Some(rest) = name.strip_prefix("convolution-a") {
            let (a, b) = rest.split_once("-b")?;
            return Some(Convolution { a: a.parse().ok()?, b: b.parse().ok()? });
        }
        None
    }

    pub fn label(&self) -> String {
        use Diagnostic::*;
        match self {
            KernelDecay { k } => format!("kernel-decay-k{k}"),
            ZoneBound(z) => format!("zone-bound-{}", z.label().to_lowercase()),
            ZoneIntegral { alpha } => format!("zone-integral-a{alpha}"),
            ZoneIntegralGap => "zone-integral-gap".into(),
            RhoSlope => "rho-linf-slope".into(),
            USlope => "u-linf-slope".into(),
            SlopeDifference => "slope-difference".into(),
            LowEnergy => "low-energy-bounded".into(),
            HighEnergy => "high-energy-bounded".into(),
            WeightedEnergy => "weighted-energy-bounded".into(),
            QDecay => "q-decay".into(),
            QScaling => "q-eps-scaling".into(),
            MassDrift => "mass-drift".into(),
            CauchySchwarz => "cauchy-schwarz".into(),
            MomentInequality => "moment-inequality".into(),
            MarginRho => "margin-rho".into(),
            MarginU => "margin-u".into(),
            VorticityDecay => "vorticity-decay".into(),
            Irrotational => "irrotational".into(),
            Blowup => "blowup".into(),
            Convolution { a, b } => format!("convolution-a{a}-b{b}"),
        }
    }

    pub fn kind(&self) -> Kind {
        use Diagnostic::*;
        match self {
            KernelDecay { .. } => Kind::KernelDecay,
            ZoneBound(_) => Kind::ZoneBounds,
            ZoneIntegral { .. } | ZoneIntegralGap => Kind::ZoneIntegrals,
            Convolution { .. } => Kind::Convolution,
            _ => Kind::Solver,
        }
    }

    pub fn belongs_to(&self, kind: Kind) -> bool {
        self.kind() == kind
    }

    /// Needs the dense moment history.
    pub fn needs_moment_series(&self) -> bool {
        matches!(
            self,
            Diagnostic::CauchySchwarz | Diagnostic::MomentInequality | Diagnostic::MarginRho | Diagnostic::MarginU
        )
    }
}
