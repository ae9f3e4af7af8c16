//! Built-in experiments: manufactured solution, surface Gaussian source,
//! energy conservation and the LOH.1 layer geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elastic3d::{Block, BlockBcs, BlockTag, BoundaryData, FaceBc};
use crate::geometry::{mms_material, BlockMapping, Lattice, Material, SurfaceFn};
use crate::krylov::{Method, SolverConfig};
use crate::timestepper::{NodalForcing, Problem};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Mms,
    GaussianSource,
    Energy,
    Loh1Geometry,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Mms => "mms",
            ScenarioName::GaussianSource => "gaussian-source",
            ScenarioName::Energy => "energy",
            ScenarioName::Loh1Geometry => "loh1-geometry",
        }
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mms" => Ok(ScenarioName::Mms),
            "gaussian-source" => Ok(ScenarioName::GaussianSource),
            "energy" => Ok(ScenarioName::Energy),
            "loh1-geometry" => Ok(ScenarioName::Loh1Geometry),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Coarse lateral and both vertical point counts; fine laterals follow from 1:2 nesting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub n1: usize,
    pub n2: usize,
    pub n3_coarse: usize,
    pub n3_fine: usize,
}

impl GridSize {
    pub fn lattices(&self, periodic: bool) -> (Lattice, Lattice) {
        let c = Lattice::new(self.n1, self.n2, self.n3_coarse, periodic);
        let (f1, f2) = c.refined_lateral();
        (c, Lattice::new(f1, f2, self.n3_fine, periodic))
    }

    /// Grid of the manufactured-solution family at coarse spacing `2π/intervals`.
    pub fn mms(intervals: usize) -> Self {
        GridSize { n1: intervals + 1, n2: intervals + 1, n3_coarse: intervals / 2 + 1, n3_fine: intervals + 1 }
    }
}

/// Which initial/boundary data a scenario uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemKind {
    Mms,
    Energy,
    /// Vertical Gaussian pulse imposed as top Dirichlet data.
    SurfaceSource { center: [f64; 2], amplitude: f64, width: f64, freq: f64, delay: f64 },
    Quiet,
}

/// Geometry, material, boundary layout and data of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub coarse_mapping: BlockMapping,
    pub fine_mapping: BlockMapping,
    pub coarse_material: Material,
    pub fine_material: Material,
    pub coarse_bcs: BlockBcs,
    pub fine_bcs: BlockBcs,
    pub grid: GridSize,
    pub t_end: f64,
    pub receivers: Vec<[f64; 3]>,
    pub problem: ProblemKind,
}

fn lateral(periodic: bool) -> FaceBc {
    if periodic {
        FaceBc::Periodic
    } else {
        FaceBc::Dirichlet
    }
}

fn bcs(periodic: bool, fine_top: FaceBc) -> (BlockBcs, BlockBcs) {
    let lat = lateral(periodic);
    (
        BlockBcs { lateral: lat, bottom: FaceBc::Dirichlet, top: FaceBc::Interface },
        BlockBcs { lateral: lat, bottom: FaceBc::Interface, top: fine_top },
    )
}

/// Parameters of the surface-source experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    pub width: f64,
    pub depth: f64,
    pub interface: f64,
    pub ripple: f64,
    pub grid: GridSize,
    pub t_end: f64,
}

impl SourceParams {
    /// Mesh 2 on the 2000 m square.
    pub fn full() -> Self {
        SourceParams {
            width: 2000.0,
            depth: 1000.0,
            interface: 800.0,
            ripple: 20.0,
            grid: GridSize { n1: 101, n2: 101, n3_coarse: 41, n3_fine: 21 },
            t_end: 0.4,
        }
    }

    /// Same spacing, wavelength and vertical layout on a 500 m square.
    pub fn reduced() -> Self {
        SourceParams { width: 500.0, grid: GridSize { n1: 26, n2: 26, n3_coarse: 41, n3_fine: 21 }, t_end: 0.35, ..Self::full() }
    }

    /// Uniform single-block lattice with the fine spacing everywhere.
    pub fn uniform_lattice(&self) -> Lattice {
        let (_, f) = self.grid.lattices(false);
        let h = self.depth - self.interface;
        let n3 = ((self.depth / h) * (f.n3 - 1) as f64).round() as usize + 1;
        Lattice::new(f.n1, f.n2, n3, false)
    }

    pub fn uniform_mapping(&self) -> BlockMapping {
        BlockMapping {
            lx: self.width,
            ly: self.width,
            bottom: SurfaceFn::Constant { c: 0.0 },
            top: SurfaceFn::Constant { c: self.depth },
        }
    }

    /// Uniform reference block with Dirichlet faces.
    pub fn uniform_block<T: Real>(&self) -> Result<Block<T>> {
        let bcs = BlockBcs { lateral: FaceBc::Dirichlet, bottom: FaceBc::Dirichlet, top: FaceBc::Dirichlet };
        Block::new(BlockTag::Single, self.uniform_mapping(), source_material(), self.uniform_lattice(), bcs)
    }
}

fn source_material() -> Material {
    Material::Constant { rho: 1.5e3, mu: 1.5e9, lambda: 3e9 }
}

impl Scenario {
    pub fn by_name(name: ScenarioName) -> Self {
        match name {
            ScenarioName::Mms => Scenario::mms(24),
            ScenarioName::GaussianSource => Scenario::gaussian_source(SourceParams::full()),
            ScenarioName::Energy => Scenario::energy(false),
            ScenarioName::Loh1Geometry => Scenario::loh1_geometry(),
        }
    }

    /// Manufactured solution on `[0,2π]²` at coarse spacing `2π/intervals`, traction on top.
    pub fn mms(intervals: usize) -> Self {
        Scenario::mms_lateral(intervals, false)
    }

    pub fn mms_lateral(intervals: usize, periodic: bool) -> Self {
        let (coarse_bcs, fine_bcs) = bcs(periodic, FaceBc::Traction);
        let mut grid = GridSize::mms(intervals);
        if periodic {
            grid.n1 = intervals;
            grid.n2 = intervals;
        }
        Scenario {
            name: ScenarioName::Mms,
            coarse_mapping: BlockMapping { lx: 2.0 * PI, ly: 2.0 * PI, bottom: SurfaceFn::mms_bottom(), top: SurfaceFn::mms_interface() },
            fine_mapping: BlockMapping { lx: 2.0 * PI, ly: 2.0 * PI, bottom: SurfaceFn::mms_interface(), top: SurfaceFn::mms_top() },
            coarse_material: Material::Mms,
            fine_material: Material::Mms,
            coarse_bcs,
            fine_bcs,
            grid,
            t_end: 0.5,
            receivers: vec![],
            problem: ProblemKind::Mms,
        }
    }

    /// Energy test: discontinuous material, Gaussian initial data, homogeneous boundaries.
    pub fn energy(periodic: bool) -> Self {
        let mut s = Scenario::mms(24);
        let (coarse_bcs, fine_bcs) = bcs(periodic, FaceBc::Dirichlet);
        s.name = ScenarioName::Energy;
        s.coarse_material = Material::EnergyCoarse;
        s.fine_material = Material::EnergyFine;
        s.coarse_bcs = coarse_bcs;
        s.fine_bcs = fine_bcs;
        if periodic {
            s.grid = GridSize { n1: 24, n2: 24, n3_coarse: 13, n3_fine: 25 };
        }
        s.t_end = 120.0;
        s.problem = ProblemKind::Energy;
        s
    }

    pub fn gaussian_source(p: SourceParams) -> Self {
        let (coarse_bcs, fine_bcs) = bcs(false, FaceBc::Dirichlet);
        let iface = SurfaceFn::Sinusoid { a: p.ripple, b: p.ripple, k: 4.0, c: p.interface };
        let mid = 0.5 * p.width;
        let below = p.interface - 2.0 * p.ripple - 0.05 * p.interface;
        let receivers = vec![
            [mid, mid, below],
            [mid, mid, 0.5 * p.interface],
            [mid, mid, 0.5 * (p.interface + p.depth)],
            [mid - 0.2 * p.width, mid, below],
            [mid + 0.15 * p.width, mid, 0.5 * (p.interface + p.depth)],
        ];
        Scenario {
            name: ScenarioName::GaussianSource,
            coarse_mapping: BlockMapping { lx: p.width, ly: p.width, bottom: SurfaceFn::Constant { c: 0.0 }, top: iface.clone() },
            fine_mapping: BlockMapping { lx: p.width, ly: p.width, bottom: iface, top: SurfaceFn::Constant { c: p.depth } },
            coarse_material: source_material(),
            fine_material: source_material(),
            coarse_bcs,
            fine_bcs,
            grid: p.grid,
            t_end: p.t_end,
            receivers,
            problem: ProblemKind::SurfaceSource { center: [mid, mid], amplitude: 1e9, width: 12.5, freq: 44.2, delay: 4.0 / 44.2 },
        }
    }

    /// LOH.1 layer over half-space with a free surface on top; geometry and material only.
    pub fn loh1_geometry() -> Self {
        let (coarse_bcs, fine_bcs) = bcs(false, FaceBc::Traction);
        let layer = |cp: f64, cs: f64, rho: f64| {
            let mu = rho * cs * cs;
            Material::Constant { rho, mu, lambda: rho * cp * cp - 2.0 * mu }
        };
        Scenario {
            name: ScenarioName::Loh1Geometry,
            coarse_mapping: BlockMapping { lx: 30000.0, ly: 30000.0, bottom: SurfaceFn::Constant { c: 0.0 }, top: SurfaceFn::Constant { c: 16000.0 } },
            fine_mapping: BlockMapping { lx: 30000.0, ly: 30000.0, bottom: SurfaceFn::Constant { c: 16000.0 }, top: SurfaceFn::Constant { c: 17000.0 } },
            coarse_material: layer(6000.0, 3464.0, 2700.0),
            fine_material: layer(4000.0, 2000.0, 2600.0),
            coarse_bcs,
            fine_bcs,
            grid: GridSize { n1: 151, n2: 151, n3_coarse: 81, n3_fine: 11 },
            t_end: 9.0,
            receivers: vec![[21000.0, 23000.0, 17000.0]],
            problem: ProblemKind::Quiet,
        }
    }

    /// Ghost-solver settings the scenario needs: an exact solve for energy
    /// bookkeeping, a relative floor for the large-amplitude source.
    pub fn recommended_solver(&self) -> SolverConfig {
        match self.name {
            ScenarioName::Energy => SolverConfig { method: Method::Lu, ..Default::default() },
            ScenarioName::GaussianSource => SolverConfig { rel_tol: Some(1e-12), ..Default::default() },
            _ => SolverConfig::default(),
        }
    }

    pub fn periodic(&self) -> bool {
        self.coarse_bcs.lateral == FaceBc::Periodic
    }

    /// Coarse and fine blocks on `grid` (defaults to the scenario grid).
    pub fn blocks<T: Real>(&self, grid: Option<GridSize>) -> Result<(Block<T>, Block<T>)> {
        let (lc, lf) = grid.unwrap_or(self.grid).lattices(self.periodic());
        let c = Block::new(BlockTag::Coarse, self.coarse_mapping.clone(), self.coarse_material.clone(), lc, self.coarse_bcs)?;
        let f = Block::new(BlockTag::Fine, self.fine_mapping.clone(), self.fine_material.clone(), lf, self.fine_bcs)?;
        Ok((c, f))
    }

    pub fn data<T: Real>(&self) -> Box<dyn Problem<T>> {
        match &self.problem {
            ProblemKind::Mms => Box::new(Mms),
            ProblemKind::Energy => Box::new(GaussianBump),
            ProblemKind::SurfaceSource { center, amplitude, width, freq, delay } => Box::new(SurfaceSource {
                center: *center,
                amplitude: *amplitude,
                width: *width,
                freq: *freq,
                delay: *delay,
                top: match &self.fine_mapping.top {
                    SurfaceFn::Constant { c } => *c,
                    _ => f64::INFINITY,
                },
            }),
            ProblemKind::Quiet => Box::new(Quiet),
        }
    }
}

/// Zero data everywhere.
pub struct Quiet;

impl<T: Real> BoundaryData<T> for Quiet {
    fn dirichlet(&self, _: BlockTag, _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
    fn traction(&self, _: BlockTag, _: [T; 3], _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
}

impl<T: Real> Problem<T> for Quiet {
    fn initial(&self, _: BlockTag, _: [T; 3]) -> [T; 3] {
        [T::zero(); 3]
    }
}

/// Gaussian initial displacement at rest, homogeneous boundaries.
pub struct GaussianBump;

impl<T: Real> BoundaryData<T> for GaussianBump {
    fn dirichlet(&self, _: BlockTag, _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
    fn traction(&self, _: BlockTag, _: [T; 3], _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
}

impl<T: Real> Problem<T> for GaussianBump {
    fn initial(&self, _: BlockTag, x: [T; 3]) -> [T; 3] {
        let pi = T::PI();
        let g = |w: [f64; 3]| (0..3).fold(T::zero(), |s, a| s - (x[a] - pi) * (x[a] - pi) / T::lit(w[a])).exp();
        [g([0.1, 0.1, 0.1]), g([0.2, 0.2, 0.2]), g([0.1, 0.2, 0.2])]
    }
}

/// Vertical surface pulse `g₃ = A·exp(−((t−t₀)f)²)·exp(−|x−c|²/w²)` on the top face.
pub struct SurfaceSource {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub width: f64,
    pub freq: f64,
    pub delay: f64,
    top: f64,
}

impl<T: Real> BoundaryData<T> for SurfaceSource {
    fn dirichlet(&self, tag: BlockTag, x: [T; 3], t: T) -> [T; 3] {
        let l = T::lit;
        let on_top = tag != BlockTag::Coarse && (x[2] - l(self.top)).abs() <= l(1e-9 * self.top.abs().max(1.0));
        if !on_top {
            return [T::zero(); 3];
        }
        let a = (t - l(self.delay)) * l(self.freq);
        let dx = (x[0] - l(self.center[0])) / l(self.width);
        let dy = (x[1] - l(self.center[1])) / l(self.width);
        [T::zero(), T::zero(), l(self.amplitude) * (-a * a).exp() * (-dx * dx - dy * dy).exp()]
    }
    fn traction(&self, _: BlockTag, _: [T; 3], _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
}

impl<T: Real> Problem<T> for SurfaceSource {
    fn initial(&self, _: BlockTag, _: [T; 3]) -> [T; 3] {
        [T::zero(); 3]
    }
}

/// One-dimensional factor `sin(ws+φ)`, `cos(ws+φ)` or `sin²(ws+φ)`.
#[derive(Clone, Copy, Debug)]
enum Factor {
    Sin(f64, f64),
    Cos(f64, f64),
    SinSq(f64, f64),
}

impl Factor {
    /// Value and first two derivatives.
    fn jet<T: Real>(&self, s: T) -> [T; 3] {
        let l = T::lit;
        match *self {
            Factor::Sin(w, p) => {
                let (sn, cs) = (l(w) * s + l(p)).sin_cos();
                [sn, l(w) * cs, -l(w * w) * sn]
            }
            Factor::Cos(w, p) => {
                let (sn, cs) = (l(w) * s + l(p)).sin_cos();
                [cs, -l(w) * sn, -l(w * w) * cs]
            }
            Factor::SinSq(w, p) => {
                let th = l(w) * s + l(p);
                let sn = th.sin();
                let (s2, c2) = (l(2.0) * th).sin_cos();
                [sn * sn, l(w) * s2, l(2.0 * w * w) * c2]
            }
        }
    }
}

/// Value, gradient and Hessian of a scalar field.
#[derive(Clone, Copy, Debug, Default)]
struct Jet<T> {
    v: T,
    g: [T; 3],
    h: [[T; 3]; 3],
}

/// `c + a·f₁(x)f₂(y)f₃(z)`.
fn separable<T: Real>(c: f64, a: f64, f: [Factor; 3], x: [T; 3]) -> Jet<T> {
    let d = [f[0].jet(x[0]), f[1].jet(x[1]), f[2].jet(x[2])];
    let prod = |o: [usize; 3]| T::lit(a) * d[0][o[0]] * d[1][o[1]] * d[2][o[2]];
    let unit = |i: usize| {
        let mut o = [0; 3];
        o[i] += 1;
        o
    };
    Jet {
        v: T::lit(c) + prod([0, 0, 0]),
        g: std::array::from_fn(|i| prod(unit(i))),
        h: std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut o = unit(i);
                o[j] += 1;
                prod(o)
            })
        }),
    }
}

fn zero_jet<T: Real>() -> Jet<T> {
    Jet { v: T::zero(), g: [T::zero(); 3], h: [[T::zero(); 3]; 3] }
}

/// Spatial parts of the manufactured displacement.
fn mms_spatial<T: Real>(x: [T; 3]) -> [Jet<T>; 3] {
    use Factor::*;
    [
        separable(0.0, 1.0, [Cos(1.0, 0.3), Sin(1.0, 0.3), Sin(1.0, 0.2)], x),
        separable(0.0, 1.0, [Sin(1.0, 0.3), Cos(1.0, 0.3), Sin(1.0, 0.2)], x),
        separable(0.0, 1.0, [Sin(1.0, 0.2), Sin(1.0, 0.2), Cos(1.0, 0.2)], x),
    ]
}

fn mms_lame<T: Real>(x: [T; 3]) -> (Jet<T>, Jet<T>) {
    use Factor::*;
    let mu = separable(3.0, 1.0, [Sin(3.0, 0.1), Sin(3.0, 0.1), Sin(1.0, 0.0)], x);
    let lambda = separable(21.0, 1.0, [Cos(1.0, 0.1), Cos(1.0, 0.1), SinSq(3.0, 0.0)], x);
    (mu, lambda)
}

/// `∇·σ(u)` for an isotropic medium.
fn div_stress<T: Real>(u: &[Jet<T>; 3], mu: &Jet<T>, lambda: &Jet<T>) -> [T; 3] {
    let div = u[0].g[0] + u[1].g[1] + u[2].g[2];
    std::array::from_fn(|j| {
        let ddiv = (0..3).fold(T::zero(), |s, i| s + u[i].h[i][j]);
        let lap = (0..3).fold(T::zero(), |s, i| s + u[j].h[i][i]);
        let mut s = lambda.g[j] * div + lambda.v * ddiv + mu.v * (lap + ddiv);
        for i in 0..3 {
            s += mu.g[i] * (u[j].g[i] + u[i].g[j]);
        }
        s
    })
}

fn stress<T: Real>(u: &[Jet<T>; 3], mu: T, lambda: T) -> [[T; 3]; 3] {
    let div = u[0].g[0] + u[1].g[1] + u[2].g[2];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d = if i == j { lambda * div } else { T::zero() };
            d + mu * (u[j].g[i] + u[i].g[j])
        })
    })
}

/// Time factors `cos t²` and `sin t` with derivatives of order 0, 2 and 4.
fn mms_time<T: Real>(t: T) -> ([T; 3], [T; 3]) {
    let l = T::lit;
    let t2 = t * t;
    let (s, c) = t2.sin_cos();
    let a = [c, -l(2.0) * s - l(4.0) * t2 * c, -l(12.0) * c + l(48.0) * t2 * s + l(16.0) * t2 * t2 * c];
    let (s1, _) = t.sin_cos();
    (a, [s1, -s1, s1])
}

/// Manufactured solution of the convergence study.
#[derive(Clone, Copy, Debug, Default)]
pub struct Mms;

impl Mms {
    pub fn displacement<T: Real>(x: [T; 3], t: T) -> [T; 3] {
        let u = mms_spatial(x);
        let (a, b) = mms_time(t);
        [u[0].v * a[0], u[1].v * a[0], u[2].v * b[0]]
    }

    pub fn displacement_tt<T: Real>(x: [T; 3], t: T) -> [T; 3] {
        let u = mms_spatial(x);
        let (a, b) = mms_time(t);
        [u[0].v * a[1], u[1].v * a[1], u[2].v * b[1]]
    }

    /// `ρ u_tt − ∇·σ(u)`.
    pub fn forcing<T: Real>(x: [T; 3], t: T) -> [T; 3] {
        MmsTerms::at(x).force(t, 1)
    }

    /// Second time derivative of [`Mms::forcing`].
    pub fn forcing_tt<T: Real>(x: [T; 3], t: T) -> [T; 3] {
        MmsTerms::at(x).force(t, 2)
    }

    /// `σ(u)·n`.
    pub fn traction<T: Real>(x: [T; 3], n: [T; 3], t: T) -> [T; 3] {
        let u = mms_spatial(x);
        let (mu, lambda) = mms_lame(x);
        let (a, b) = mms_time(t);
        let z = zero_jet();
        let s1 = stress(&[u[0], u[1], z], mu.v, lambda.v);
        let s3 = stress(&[z, z, u[2]], mu.v, lambda.v);
        std::array::from_fn(|i| (0..3).fold(T::zero(), |s, j| s + (a[0] * s1[i][j] + b[0] * s3[i][j]) * n[j]))
    }
}

/// Time-independent pieces of the manufactured forcing at one point.
#[derive(Clone, Copy, Debug)]
struct MmsTerms<T> {
    rho_a: [T; 3],
    v: [T; 3],
    w: [T; 3],
}

impl<T: Real> MmsTerms<T> {
    fn at(x: [T; 3]) -> Self {
        let u = mms_spatial(x);
        let (mu, lambda) = mms_lame(x);
        let rho = mms_material(x).0;
        let z = zero_jet();
        MmsTerms {
            rho_a: [rho * u[0].v, rho * u[1].v, rho * u[2].v],
            v: div_stress(&[u[0], u[1], z], &mu, &lambda),
            w: div_stress(&[z, z, u[2]], &mu, &lambda),
        }
    }

    /// Force (`order` 1) or its second time derivative (`order` 2).
    fn force(&self, t: T, order: usize) -> [T; 3] {
        let (a, b) = mms_time(t);
        let (a0, a2, b0, b2) = (a[order - 1], a[order], b[order - 1], b[order]);
        [
            self.rho_a[0] * a2 - a0 * self.v[0] - b0 * self.w[0],
            self.rho_a[1] * a2 - a0 * self.v[1] - b0 * self.w[1],
            self.rho_a[2] * b2 - a0 * self.v[2] - b0 * self.w[2],
        ]
    }
}

struct MmsForcing<T> {
    terms: Vec<MmsTerms<T>>,
}

impl<T: Real> NodalForcing<T> for MmsForcing<T> {
    fn eval(&self, node: usize, t: T) -> [T; 3] {
        self.terms[node].force(t, 1)
    }
    fn eval_tt(&self, node: usize, t: T) -> [T; 3] {
        self.terms[node].force(t, 2)
    }
}

impl<T: Real> BoundaryData<T> for Mms {
    fn dirichlet(&self, _: BlockTag, x: [T; 3], t: T) -> [T; 3] {
        Mms::displacement(x, t)
    }
    fn traction(&self, _: BlockTag, x: [T; 3], n: [T; 3], t: T) -> [T; 3] {
        Mms::traction(x, n, t)
    }
    fn dirichlet_tt(&self, _: BlockTag, x: [T; 3], t: T) -> [T; 3] {
        Mms::displacement_tt(x, t)
    }
}

impl<T: Real> Problem<T> for Mms {
    fn initial(&self, _: BlockTag, x: [T; 3]) -> [T; 3] {
        Mms::displacement(x, T::zero())
    }
    fn exact(&self, _: BlockTag, x: [T; 3], t: T) -> Option<[T; 3]> {
        Some(Mms::displacement(x, t))
    }
    fn has_exact(&self) -> bool {
        true
    }
    fn forcing(&self, block: &Block<T>) -> Option<Box<dyn NodalForcing<T>>> {
        Some(Box::new(MmsForcing { terms: block.metric.x.iter().map(|x| MmsTerms::at(*x)).collect() }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sixth-order central first derivative of `f` along axis `a`.
    fn fd(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], a: usize, h: f64) -> f64 {
        let at = |s: f64| {
            let mut y = x;
            y[a] += s * h;
            f(y)
        };
        (45.0 * (at(1.0) - at(-1.0)) - 9.0 * (at(2.0) - at(-2.0)) + (at(3.0) - at(-3.0))) / (60.0 * h)
    }

    /// Sixth-order central second derivative in time.
    fn fd_tt(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let c = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        (c[0] * f(t) + (1..4).map(|m| c[m] * (f(t + m as f64 * h) + f(t - m as f64 * h))).sum::<f64>()) / (h * h)
    }

    /// `ρu_tt − ∇·σ` with every derivative taken by finite differences.
    fn oracle(x: [f64; 3], t: f64) -> [f64; 3] {
        let h = 1e-3;
        let sigma = |y: [f64; 3], i: usize, j: usize| {
            let (_, mu, lambda) = mms_material(y);
            let grad = |c: usize, a: usize| fd(&|z| Mms::displacement(z, t)[c], y, a, h);
            let div = grad(0, 0) + grad(1, 1) + grad(2, 2);
            (if i == j { lambda * div } else { 0.0 }) + mu * (grad(j, i) + grad(i, j))
        };
        let rho = mms_material(x).0;
        std::array::from_fn(|j| {
            let dsig: f64 = (0..3).map(|i| fd(&|y| sigma(y, i, j), x, i, h)).sum();
            rho * fd_tt(&|s| Mms::displacement(x, s)[j], t, h) - dsig
        })
    }

    #[test]
    fn forcing_matches_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..6 {
            let x = [rng.gen_range(0.0..6.2), rng.gen_range(0.0..6.2), rng.gen_range(0.0..6.5)];
            let t = rng.gen_range(0.0..0.5);
            let (f, g) = (Mms::forcing(x, t), oracle(x, t));
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for p in 0..3 {
                assert!((f[p] - g[p]).abs() < 1e-8 * scale, "component {p} at {x:?}, t={t}: {} vs {}", f[p], g[p]);
            }
        }
    }

    #[test]
    fn displacement_tt_matches_differences() {
        let x = [0.4, 5.0, 2.2];
        for t in [0.0, 0.3, 0.5] {
            let a = Mms::displacement_tt(x, t);
            for p in 0..3 {
                let g = fd_tt(&|s| Mms::displacement(x, s)[p], t, 1e-3);
                assert!((a[p] - g).abs() < 1e-8, "component {p} at t={t}");
            }
        }
    }

    #[test]
    fn forcing_tt_is_second_time_derivative() {
        let x = [1.1, 2.3, 4.0];
        for t in [0.0, 0.2, 0.45] {
            let h = 1e-3;
            let fd2: [f64; 3] = std::array::from_fn(|p| fd_tt(&|s| Mms::forcing(x, s)[p], t, h));
            let an = Mms::forcing_tt(x, t);
            for p in 0..3 {
                assert!((fd2[p] - an[p]).abs() < 1e-7 * an[p].abs().max(1.0), "{p}: {} vs {}", fd2[p], an[p]);
            }
        }
    }

    #[test]
    fn third_component_at_rest_is_pure_divergence() {
        let x = [0.4f64, 1.7, 3.0];
        let f = Mms::forcing(x, 0.0);
        let (mu, lambda) = mms_lame(x);
        let u = mms_spatial(x);
        let z = zero_jet();
        let d = div_stress(&[u[0], u[1], z], &mu, &lambda);
        assert!((f[2] + d[2]).abs() < 1e-14);
        let y = [PI / 2.0 - 0.3, PI / 2.0 - 0.3, PI / 2.0 - 0.2];
        assert!(Mms::displacement(y, 0.0)[0].abs() < 1e-15);
    }

    #[test]
    fn lame_jets_match_material() {
        let x = [0.3f64, 5.0, 2.2];
        let (mu, lambda) = mms_lame(x);
        let (_, m, l) = mms_material(x);
        assert!((mu.v - m).abs() < 1e-14 && (lambda.v - l).abs() < 1e-13);
    }

    #[test]
    fn surfaces_are_shared() {
        for s in [Scenario::mms(24), Scenario::energy(false), Scenario::gaussian_source(SourceParams::reduced()), Scenario::loh1_geometry()] {
            assert_eq!(s.coarse_mapping.top, s.fine_mapping.bottom);
            for r in [[0.0, 0.0], [0.31, 0.77], [1.0, 0.5]] {
                assert_eq!(s.coarse_mapping.top.value::<f64>(r[0], r[1]).to_bits(), s.fine_mapping.bottom.value::<f64>(r[0], r[1]).to_bits());
            }
        }
    }

    #[test]
    fn energy_initial_data_peaks_at_centre() {
        let u = <GaussianBump as Problem<f64>>::initial(&GaussianBump, BlockTag::Fine, [PI, PI, PI]);
        assert_eq!(u, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn source_material_speeds() {
        if let Material::Constant { rho, mu, .. } = source_material() {
            assert_eq!((mu / rho).sqrt(), 1000.0);
        }
        let f0 = 44.2 * 2f64.sqrt() / (2.0 * PI);
        assert!((1000.0 / f0 - 100.0).abs() < 1.0);
    }

    #[test]
    fn mms_boundary_data_consistent_with_exact_solution() {
        let s = Scenario::mms(12);
        let (c, f) = s.blocks::<f64>(Some(GridSize { n1: 9, n2: 9, n3_coarse: 8, n3_fine: 9 })).unwrap();
        let p = s.data::<f64>();
        for b in [&c, &f] {
            for (n, x) in b.metric.x.iter().enumerate().step_by(7) {
                let e = p.exact(b.tag, *x, 0.3).unwrap();
                let d = p.dirichlet(b.tag, *x, 0.3);
                assert_eq!(e, d, "node {n}");
            }
        }
    }

    #[test]
    fn reduced_source_grid_matches_fine_spacing() {
        let p = SourceParams::reduced();
        let (c, f) = p.grid.lattices(false);
        assert_eq!((c.n1, f.n1), (26, 51));
        assert_eq!(p.uniform_lattice().n3, 101);
        assert!((p.width / (f.n1 - 1) as f64 - 10.0).abs() < 1e-12);
    }
}
