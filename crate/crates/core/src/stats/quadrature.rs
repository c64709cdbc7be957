//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval is first cut into `initial_panels` equal pieces. The piece with
//! the largest Kronrod-minus-Gauss error estimate is bisected until the summed
//! estimate falls below `max(abs_tol, rel_tol·|I|)` or `max_panels` is reached.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            initial_panels: 8,
            max_panels: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    integrate_breaks(f, &[a, b], tol)
}

/// Integrates over consecutive segments `breaks[i]..breaks[i+1]`, each split into
/// `initial_panels` pieces before refinement starts.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Estimate {
    let mut heap = BinaryHeap::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            continue;
        }
        let n = tol.initial_panels.max(1);
        let width = (b - a) / n as f64;
        for i in 0..n {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n { b } else { lo + width };
            heap.push(gk15(&f, lo, hi));
        }
    }

    let totals = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    loop {
        let (value, error) = totals(&heap);
        if error <= tol.abs_tol.max(tol.rel_tol * value.abs()) || heap.len() >= tol.max_panels {
            return Estimate { value, error };
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split further in floating point
            heap.push(worst);
            let (value, error) = totals(&heap);
            return Estimate { value, error };
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
    }
}
