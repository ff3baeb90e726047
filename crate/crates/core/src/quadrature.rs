//! Adaptive Gauss–Kronrod (10/21-point) quadrature for scalar and matrix-valued
//! integrands.

use crate::error::{Error, Result};
use crate::fock::CMatrix;

/// Values that can be integrated: a vector space with a max-norm.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// self += a · x
    fn axpy(&mut self, a: f64, x: &Self);
    fn max_abs(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_apply(x, |s, v| *s += v * a);
    }

    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Kronrod estimate and |K − G| as its error.
fn gk21<V, F>(f: &F, a: f64, b: f64) -> (V, f64)
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc.zero_like();
    kronrod.axpy(WGK[10], &fc);
    let mut gauss = fc.zero_like();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod.axpy(WGK[j], &f1);
        kronrod.axpy(WGK[j], &f2);
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2], &f1);
            gauss.axpy(WG[j / 2], &f2);
        }
    }
    let mut diff = kronrod.clone();
    diff.axpy(-1.0, &gauss);
    let mut value = kronrod.zero_like();
    value.axpy(half, &kronrod);
    (value, diff.max_abs() * half.abs())
}

#[derive(Debug, Clone)]
pub struct Integral<V> {
    pub value: V,
    /// Summed per-panel error estimate (max-norm).
    pub error: f64,
    pub panels: usize,
}

/// Integrates `f` over [a, b], bisecting the panel with the largest error
/// until the summed error is at most `tol · max(‖value‖, scale)`.
pub fn integrate<V, F>(f: F, a: f64, b: f64, tol: f64, scale: f64) -> Result<Integral<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    const MAX_PANELS: usize = 2000;
    let mut panels: Vec<(f64, f64, V, f64)> = Vec::new();
    let (v, e) = gk21(&f, a, b);
    panels.push((a, b, v, e));
    loop {
        let total = sum_panels(&mut panels);
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let target = tol * total.max_abs().max(scale);
        if !err.is_finite() || !total.max_abs().is_finite() {
            return Err(Error::QuadratureNonConvergence {
                achieved: f64::INFINITY,
                requested: tol,
            });
        }
        if err <= target {
            return Ok(Integral {
                value: total,
                error: err,
                panels: panels.len(),
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConvergence {
                achieved: err / total.max_abs().max(scale).max(f64::MIN_POSITIVE),
                requested: tol,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.3 > panels[best].3 { i } else { best });
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk21(&f, lo, mid);
        let (v2, e2) = gk21(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

// Sums in left-to-right order so the result does not depend on refinement history.
fn sum_panels<V: QuadValue>(panels: &mut [(f64, f64, V, f64)]) -> V {
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = panels[0].2.zero_like();
    for p in panels.iter() {
        total.axpy(1.0, &p.2);
    }
    total
}
