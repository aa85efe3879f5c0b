//! Floating-point accumulation helpers.
//!
//! The estimator promises bitwise-identical results under record
//! reordering and label renaming, which both permute the terms of its
//! sums. `exact_sum` returns the correctly rounded sum of its inputs, so
//! the result depends only on the multiset of terms, never on their
//! order or on how work was scheduled across threads.

/// Correctly rounded sum of a sequence of finite doubles.
///
/// Maintains a list of non-overlapping partial sums (Shewchuk's
/// expansion-sum), then rounds the exact total to the nearest double,
/// including the half-way tie correction. The result is independent of
/// the input order.
pub fn exact_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut partials: Vec<f64> = Vec::with_capacity(16);
    for value in values {
        let mut x = value;
        let mut used = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[used] = lo;
                used += 1;
            }
            x = hi;
        }
        partials.truncate(used);
        partials.push(x);
    }

    // Partials are non-overlapping with strictly increasing magnitude.
    // Fold from the largest down, stopping at the first non-zero
    // residual; the residual plus the sign of the next partial decide a
    // possible half-ulp correction (same scheme as CPython's fsum).
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut total = partials[n];
    while n > 0 {
        let x = total;
        n -= 1;
        let y = partials[n];
        total = x + y;
        let yr = total - x;
        let lo = y - yr;
        if lo != 0.0 {
            if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))
            {
                let y2 = lo * 2.0;
                let x2 = total + y2;
                if y2 == x2 - total {
                    total = x2;
                }
            }
            break;
        }
    }
    total
}

/// Neumaier-compensated accumulator for long streaming sums where the
/// full `exact_sum` partial list would be overkill.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    correction: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.correction += (self.sum - t) + term;
        } else {
            self.correction += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.correction
    }
}
