/// Fixed-length sample line that shifts by one cell per step without moving
/// data. Logical index 0 is `x = 0` and the last index is `x = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buf: Vec<f64>,
    head: usize,
}

impl DelayLine {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty());
        DelayLine {
            buf: samples,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        let n = self.buf.len();
        let idx = self.head + j;
        self.buf[if idx >= n { idx - n } else { idx }]
    }

    pub fn first(&self) -> f64 {
        self.get(0)
    }

    pub fn last(&self) -> f64 {
        self.get(self.buf.len() - 1)
    }

    /// Moves every sample one cell toward `x = 0`, dropping the sample at
    /// `x = 0` and writing `inflow` at `x = 1`.
    pub fn shift_toward_start(&mut self, inflow: f64) {
        let old_head = self.head;
        self.head += 1;
        if self.head == self.buf.len() {
            self.head = 0;
        }
        self.buf[old_head] = inflow;
    }

    /// Moves every sample one cell toward `x = 1`, dropping the sample at
    /// `x = 1` and writing `inflow` at `x = 0`.
    pub fn shift_toward_end(&mut self, inflow: f64) {
        self.head = if self.head == 0 {
            self.buf.len() - 1
        } else {
            self.head - 1
        };
        self.buf[self.head] = inflow;
    }

    /// Samples in logical order as two contiguous runs.
    pub fn as_slices(&self) -> (&[f64], &[f64]) {
        let (front, back) = self.buf.split_at(self.head);
        (back, front)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.as_slices();
        a.iter().chain(b).copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.buf.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid-weighted sum of squares (end samples count half).
    pub fn trapezoid_sum_sq(&self) -> f64 {
        let total: f64 = self.buf.iter().map(|v| v * v).sum();
        let (a, b) = (self.first(), self.last());
        total - 0.5 * (a * a + b * b)
    }
}
