//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! l_max = 3.1
//! dt = 1e-3
//! out = "flatlab-out"
//! orientation = "oriented"
//!
//! [chart]
//! kind = "expr"
//! phi = "-log(y)"
//! domain = "upper_half_plane"
//!
//! [family]
//! law = "conformal"
//! u = "1 + 0.3*bump(((x-0.1)^2 + (y-1.2)^2)/(0.306*y))"
//! ```

use std::path::{Path, PathBuf};

use flatlab_core::expr::Expr;
use flatlab_core::field::{DerivativeMode, ScalarField, TensorField, VectorField};
use flatlab_core::flat_trace::TestFunction;
use flatlab_core::fuchsian::invariant::Invariance;
use flatlab_core::fuchsian::systole;
use flatlab_core::metric::{ConformalChart, Domain, Law, MetricFamily};
use flatlab_core::variation::{metric_tensor, pullback_family};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Oriented,
    Unoriented,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    #[default]
    HalfPlane,
    Disk,
    Flat,
    Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Plane,
    #[default]
    UpperHalfPlane,
    UnitDisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartSpec {
    pub kind: ChartKind,
    /// Conformal exponent for `kind = "expr"`.
    pub phi: Option<String>,
    pub domain: DomainKind,
    pub derivatives: Derivatives,
    /// Treat the chart as negatively curved when validating.
    pub negatively_curved: bool,
}

impl Default for ChartSpec {
    fn default() -> Self {
        Self {
            kind: ChartKind::HalfPlane,
            phi: None,
            domain: DomainKind::UpperHalfPlane,
            derivatives: Derivatives::Analytic,
            negatively_curved: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// `g_t = e^{2tu} g`.
    #[default]
    Conformal,
    /// `g_t = g + t h`.
    Tensor,
    /// `ġ = ℒ_v g`, a first-order isometric family.
    Pullback,
    /// `g_t = (1 + t) g`.
    Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    pub law: LawKind,
    pub u: Option<String>,
    pub h11: Option<String>,
    pub h12: Option<String>,
    pub h22: Option<String>,
    pub v1: Option<String>,
    pub v2: Option<String>,
    /// Extend the expressions from the fundamental domain by the group action.
    pub invariant: bool,
}

pub const DEFAULT_U: &str = "1 + 0.3*bump(((x-0.1)^2 + (y-1.2)^2)/(0.306*y))";

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            law: LawKind::Conformal,
            u: Some(DEFAULT_U.into()),
            h11: None,
            h12: None,
            h22: None,
            v1: None,
            v2: None,
            invariant: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub monodromy: f64,
    pub variation: f64,
    pub homothety: f64,
    pub coboundary: f64,
    pub pairing: f64,
    pub transport: f64,
    pub delta_prime: f64,
    pub commutator: f64,
    pub commutator_fd: f64,
    pub energy: f64,
    pub coercivity: f64,
    pub modes: f64,
    pub ladder: f64,
    pub gk_strip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            monodromy: 1e-8,
            variation: 1e-5,
            homothety: 1e-8,
            coboundary: 1e-6,
            pairing: 1e-4,
            transport: 1e-6,
            delta_prime: 1e-6,
            commutator: 1e-6,
            commutator_fd: 1e-4,
            energy: 1e-6,
            coercivity: 1e-8,
            modes: 1e-12,
            ladder: 1e-6,
            gk_strip: 1e-6,
        }
    }
}

impl Tolerances {
    fn all(&self) -> [(&'static str, f64); 14] {
        [
            ("monodromy", self.monodromy),
            ("variation", self.variation),
            ("homothety", self.homothety),
            ("coboundary", self.coboundary),
            ("pairing", self.pairing),
            ("transport", self.transport),
            ("delta_prime", self.delta_prime),
            ("commutator", self.commutator),
            ("commutator_fd", self.commutator_fd),
            ("energy", self.energy),
            ("coercivity", self.coercivity),
            ("modes", self.modes),
            ("ladder", self.ladder),
            ("gk_strip", self.gk_strip),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunctionSpec {
    /// Centre `ℓ0`; the systole when absent.
    pub center: Option<f64>,
    pub half_width: f64,
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        Self { center: None, half_width: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Random families in the first-variation suite.
    pub families: usize,
    /// Random vector fields in the coboundary and strip suites.
    pub vector_fields: usize,
    /// Random families in the pairing suite.
    pub pairing_families: usize,
    /// Highest mode of the random test functions on the sphere bundle.
    pub m_max: usize,
    /// Grid points per side in the frame suites.
    pub grid: usize,
    /// Extra primitive classes sampled for the monodromy suite.
    pub monodromy_samples: usize,
    /// Monodromy suite covers lengths up to this multiple of the systole.
    pub monodromy_factor: f64,
    /// Use the zero vector field in the coboundary and strip suites.
    pub zero_vector_field: bool,
    /// Negate `X⊥` in the frame suites (negative control).
    pub flip_xperp: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            families: 20,
            vector_fields: 10,
            pairing_families: 2,
            m_max: 4,
            grid: 7,
            monodromy_samples: 12,
            monodromy_factor: 3.0,
            zero_vector_field: false,
            flip_xperp: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub l_max: f64,
    pub dt: f64,
    pub out: PathBuf,
    pub orientation: Orientation,
    pub chart: ChartSpec,
    pub family: FamilySpec,
    pub tolerances: Tolerances,
    pub test_function: TestFunctionSpec,
    pub verify: VerifySpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            l_max: 3.1,
            dt: 1e-3,
            out: PathBuf::from("flatlab-out"),
            orientation: Orientation::Oriented,
            chart: ChartSpec::default(),
            family: FamilySpec::default(),
            tolerances: Tolerances::default(),
            test_function: TestFunctionSpec::default(),
            verify: VerifySpec::default(),
        }
    }
}

fn parse_expr(name: &str, src: &Option<String>) -> CliResult<ScalarField> {
    let src = src.as_deref().ok_or_else(|| CliError::Config(format!("missing expression `{name}`")))?;
    Expr::parse(src)
        .map(ScalarField::from_expr)
        .map_err(|e| CliError::Config(format!("expression `{name}`: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_toml(&crate::report::read(path).map_err(|e| CliError::Config(e.to_string()))?)
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, v) in self.tolerances.all() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        if !(self.l_max > 0.0 && self.l_max.is_finite()) {
            return Err(CliError::Config(format!("l_max must be positive, got {}", self.l_max)));
        }
        if !(self.dt > 0.0 && self.dt < 0.05) {
            return Err(CliError::Config(format!("dt must lie in (0, 0.05), got {}", self.dt)));
        }
        if !(self.test_function.half_width > 0.0) {
            return Err(CliError::Config("test_function.half_width must be positive".into()));
        }
        if self.verify.m_max == 0 || self.verify.grid < 2 {
            return Err(CliError::Config("verify.m_max must be >= 1 and verify.grid >= 2".into()));
        }
        self.chart()?;
        self.family()?;
        Ok(())
    }

    /// The chart of the frame suites.
    pub fn chart(&self) -> CliResult<ConformalChart> {
        let c = &self.chart;
        let mut chart = match c.kind {
            ChartKind::HalfPlane => ConformalChart::half_plane(),
            ChartKind::Disk => ConformalChart::disk(),
            ChartKind::Flat => ConformalChart::flat(domain(c.domain)),
            ChartKind::Expr => {
                let mut ch = ConformalChart::new("expr", parse_expr("phi", &c.phi)?, domain(c.domain));
                ch.negatively_curved = c.negatively_curved;
                ch
            }
        };
        if c.kind != ChartKind::Expr && c.phi.is_some() {
            return Err(CliError::Config("chart.phi is only read when kind = \"expr\"".into()));
        }
        if c.derivatives == Derivatives::FiniteDifference {
            chart = chart.with_mode(DerivativeMode::finite_difference());
        }
        Ok(chart)
    }

    /// Base chart of the surface experiments: the half-plane.
    pub fn surface_chart(&self) -> ConformalChart {
        let chart = ConformalChart::half_plane();
        match self.chart.derivatives {
            Derivatives::Analytic => chart,
            Derivatives::FiniteDifference => chart.with_mode(DerivativeMode::finite_difference()),
        }
    }

    pub fn family(&self) -> CliResult<MetricFamily> {
        let f = &self.family;
        let chart = self.surface_chart();
        let inv = f.invariant.then(Invariance::bolza);
        let family = match f.law {
            LawKind::Conformal => {
                let u = parse_expr("u", &f.u)?;
                let u = inv.as_ref().map_or(u.clone(), |i| i.scalar(&u));
                MetricFamily::new(chart, Law::ConformalExp(u))
            }
            LawKind::Tensor => {
                let h = TensorField::from_components(
                    parse_expr("h11", &f.h11)?,
                    parse_expr("h12", &f.h12)?,
                    parse_expr("h22", &f.h22)?,
                );
                let h = inv.as_ref().map_or(h.clone(), |i| i.tensor(&h));
                MetricFamily::new(chart, Law::LinearTensor(h))
            }
            LawKind::Pullback => {
                let v = VectorField::from_components(parse_expr("v1", &f.v1)?, parse_expr("v2", &f.v2)?);
                let v = inv.as_ref().map_or(v.clone(), |i| i.vector(&v));
                pullback_family(&chart, &v)
            }
            LawKind::Metric => {
                let g = metric_tensor(&chart);
                MetricFamily::new(chart, Law::LinearTensor(g))
            }
        };
        Ok(family)
    }

    pub fn test_function(&self) -> CliResult<TestFunction> {
        let c = self.test_function.center.unwrap_or_else(systole);
        TestFunction::calibrated(c, self.test_function.half_width).map_err(config_err)
    }
}

fn domain(d: DomainKind) -> Domain {
    match d {
        DomainKind::Plane => Domain::Plane,
        DomainKind::UpperHalfPlane => Domain::UpperHalfPlane,
        DomainKind::UnitDisk => Domain::Disk { cx: 0.0, cy: 0.0, r: 1.0 },
    }
}
