//! Upper envelope of lines queried at a fixed increasing grid (Li Chao tree).

pub(crate) struct MaxEnvelope<'a> {
    xs: &'a [f64],
    tree: Vec<Option<(f64, f64)>>,
}

#[inline]
fn eval(line: (f64, f64), x: f64) -> f64 {
    line.1 + line.0 * x
}

impl<'a> MaxEnvelope<'a> {
    /// `xs` must be non-decreasing; queries are by index into it.
    pub fn new(xs: &'a [f64]) -> Self {
        let size = 4 * xs.len().max(1);
        MaxEnvelope {
            xs,
            tree: vec![None; size],
        }
    }

    /// Adds `y = intercept + slope * x`.
    pub fn insert(&mut self, slope: f64, intercept: f64) {
        let hi = self.xs.len() - 1;
        self.insert_at(1, 0, hi, (slope, intercept));
    }

    fn insert_at(&mut self, node: usize, lo: usize, hi: usize, mut line: (f64, f64)) {
        let Some(mut cur) = self.tree[node] else {
            self.tree[node] = Some(line);
            return;
        };
        let mid = (lo + hi) / 2;
        let (xl, xm, xh) = (self.xs[lo], self.xs[mid], self.xs[hi]);
        if eval(line, xm) > eval(cur, xm) {
            std::mem::swap(&mut cur, &mut line);
            self.tree[node] = Some(cur);
        }
        if lo == hi {
            return;
        }
        if eval(line, xl) > eval(cur, xl) {
            self.insert_at(2 * node, lo, mid, line);
        } else if eval(line, xh) > eval(cur, xh) {
            self.insert_at(2 * node + 1, mid + 1, hi, line);
        }
    }

    /// Maximum over inserted lines at `xs[i]` (`-inf` when empty).
    pub fn query(&self, i: usize) -> f64 {
        let x = self.xs[i];
        let (mut node, mut lo, mut hi) = (1, 0, self.xs.len() - 1);
        let mut best = f64::NEG_INFINITY;
        loop {
            if let Some(line) = self.tree[node] {
                best = best.max(eval(line, x));
            }
            if lo == hi {
                return best;
            }
            let mid = (lo + hi) / 2;
            if i <= mid {
                node *= 2;
                hi = mid;
            } else {
                node = 2 * node + 1;
                lo = mid + 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_naive_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..257).map(|_| rng.gen_range(-5.0..5.0)).collect();
        xs.sort_by(f64::total_cmp);
        let mut env = MaxEnvelope::new(&xs);
        let mut lines = Vec::new();
        for _ in 0..60 {
            let l = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            env.insert(l.0, l.1);
            lines.push(l);
            for (i, &x) in xs.iter().enumerate() {
                let naive = lines
                    .iter()
                    .map(|&l| eval(l, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(env.query(i), naive);
            }
        }
    }
}
