//! Convex piecewise polynomial (degree <= 2) functions of one scalar.
//!
//! These are the messages of the forward-backward dynamic program: the
//! absolute-deviation loss builds piecewise-linear functions, the squared
//! loss piecewise-quadratic ones. The two operations that matter are
//! pointwise addition of a loss term and "clipping", the inf-convolution
//! with `lambda2 * |.|` that caps the derivative at `[-lambda2, lambda2]`.

/// One polynomial piece `a*x^2 + b*x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Segment {
    fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    fn deriv(&self, x: f64) -> f64 {
        2.0 * self.a * x + self.b
    }
}

/// Where the derivative of a message crosses `-lambda2` and `+lambda2`.
///
/// `neg_lo..=neg_hi` is the (possibly degenerate) interval on which the
/// subdifferential contains `-lambda2`; `pos_lo..=pos_hi` likewise for
/// `+lambda2`. An empty crossing is encoded as `-inf` (left side) or
/// `+inf` (right side), which makes the backward-pass comparisons fall
/// through naturally.
#[derive(Debug, Clone, Copy)]
pub struct ClipInterval {
    pub neg_lo: f64,
    pub neg_hi: f64,
    pub pos_lo: f64,
    pub pos_hi: f64,
}

/// Convex function defined on all of R.
///
/// `segments[k]` applies on `(breakpoints[k-1], breakpoints[k])`, with the
/// outer pieces extending to -inf and +inf. Invariants: breakpoints are
/// strictly increasing, curvatures are >= 0, derivatives are nondecreasing
/// across pieces, and adjacent pieces agree at their shared breakpoint.
#[derive(Debug, Clone)]
pub struct PiecewiseConvexFn {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
    merge_tol: f64,
}

impl PiecewiseConvexFn {
    pub fn constant(c: f64, merge_tol: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            segments: vec![Segment { a: 0.0, b: 0.0, c }],
            merge_tol,
        }
    }

    pub fn num_breakpoints(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].eval(x)
    }

    /// Index of the piece that applies just right of `x`.
    fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&bp| bp <= x)
    }

    /// Add `w * |x - knot|` pointwise (w >= 0).
    pub fn add_abs(&mut self, knot: f64, w: f64) {
        if w == 0.0 {
            return;
        }
        let mut pos = self.breakpoints.partition_point(|&bp| bp < knot);
        // Reuse a breakpoint on either side within the merge tolerance.
        let exists = if pos < self.breakpoints.len()
            && (self.breakpoints[pos] - knot).abs() <= self.merge_tol
        {
            true
        } else if pos > 0 && (knot - self.breakpoints[pos - 1]).abs() <= self.merge_tol {
            pos -= 1;
            true
        } else {
            false
        };
        let knot = if exists { self.breakpoints[pos] } else { knot };
        if !exists {
            self.breakpoints.insert(pos, knot);
            let seg = self.segments[pos];
            self.segments.insert(pos, seg);
        }
        // Pieces at index <= pos lie left of the knot, the rest right.
        for seg in &mut self.segments[..=pos] {
            seg.b -= w;
            seg.c += w * knot;
        }
        for seg in &mut self.segments[pos + 1..] {
            seg.b += w;
            seg.c -= w * knot;
        }
    }

    /// Add the quadratic `a*x^2 + b*x + c` pointwise (a >= 0).
    pub fn add_quadratic(&mut self, a: f64, b: f64, c: f64) {
        for seg in &mut self.segments {
            seg.a += a;
            seg.b += b;
            seg.c += c;
        }
    }

    /// The interval `[lo, hi]` on which the subdifferential contains `s`:
    /// `lo` is the first point whose right-derivative is >= s, `hi` the
    /// last point whose left-derivative is <= s. Returns `(-inf, -inf)`
    /// when the derivative stays above `s` everywhere and
    /// `(+inf, +inf)` when it stays below.
    pub fn crossing_interval(&self, s: f64) -> (f64, f64) {
        let k = self.segments.len();
        // lo: scan for the first piece whose derivative reaches s.
        let mut lo = f64::INFINITY;
        let mut lo_idx = k;
        for i in 0..k {
            let seg = &self.segments[i];
            let left = if i == 0 {
                f64::NEG_INFINITY
            } else {
                self.breakpoints[i - 1]
            };
            let right = if i < k - 1 {
                self.breakpoints[i]
            } else {
                f64::INFINITY
            };
            let d_start = if left.is_finite() {
                seg.deriv(left)
            } else if seg.a > 0.0 {
                f64::NEG_INFINITY
            } else {
                seg.b
            };
            if d_start >= s {
                // The derivative already qualifies at the piece's left end:
                // the crossing is the shared breakpoint (or -inf).
                lo = left;
                lo_idx = i;
                break;
            }
            if seg.a > 0.0 {
                let x = (s - seg.b) / (2.0 * seg.a);
                if x < right {
                    lo = x.max(left);
                    lo_idx = i;
                    break;
                }
            }
        }
        if lo_idx == k {
            return (f64::INFINITY, f64::INFINITY);
        }
        // hi: extend over any flat run at derivative exactly s.
        let mut hi = lo;
        for i in lo_idx..k {
            let seg = &self.segments[i];
            let right = if i < k - 1 {
                self.breakpoints[i]
            } else {
                f64::INFINITY
            };
            if seg.a > 0.0 {
                let x = (s - seg.b) / (2.0 * seg.a);
                if x <= right {
                    if x >= hi {
                        hi = x;
                    }
                    break;
                }
                // Derivative stays below s on the whole piece.
                hi = right;
            } else if seg.b < s {
                hi = right;
            } else if seg.b == s {
                hi = right;
            } else {
                break;
            }
            if !hi.is_finite() {
                break;
            }
        }
        (lo, hi)
    }

    /// Inf-convolution with `lambda2 * |.|`: replaces the parts of the
    /// function whose derivative leaves `[-lambda2, lambda2]` by linear
    /// tails with those slopes. Returns the crossing intervals of the
    /// *unclipped* function, which is exactly what the backward pass needs.
    pub fn clip(&mut self, lambda2: f64) -> ClipInterval {
        let (neg_lo, neg_hi) = self.crossing_interval(-lambda2);
        let (pos_lo, pos_hi) = self.crossing_interval(lambda2);
        let info = ClipInterval {
            neg_lo,
            neg_hi,
            pos_lo,
            pos_hi,
        };
        // With lambda2 = 0 both crossings coincide with the argmin
        // interval; truncating left at neg_hi and right at pos_lo would
        // cross over, so order the cut points.
        let left_cut = neg_hi;
        let right_cut = pos_lo.max(neg_hi);
        if right_cut.is_finite() {
            self.truncate_right(right_cut, lambda2);
        }
        if left_cut.is_finite() {
            self.truncate_left(left_cut, -lambda2);
        }
        info
    }

    /// Replace the function left of `x0` by the line of slope `slope`
    /// through `(x0, f(x0))`.
    fn truncate_left(&mut self, x0: f64, slope: f64) {
        let v = self.eval(x0);
        let idx = self.segment_index(x0);
        // Keep pieces idx.. ; new first piece is the linear tail.
        self.segments.drain(..idx);
        self.breakpoints.drain(..idx);
        let tail = Segment {
            a: 0.0,
            b: slope,
            c: v - slope * x0,
        };
        // Avoid a zero-width piece when x0 is an existing breakpoint.
        if !self.breakpoints.is_empty() && (self.breakpoints[0] - x0).abs() <= self.merge_tol {
            self.segments[0] = tail;
        } else if segments_equal(&self.segments[0], &tail) {
            // The kept piece already is that line.
        } else {
            self.breakpoints.insert(0, x0);
            self.segments.insert(0, tail);
        }
    }

    /// Replace the function right of `x0` by the line of slope `slope`
    /// through `(x0, f(x0))`.
    fn truncate_right(&mut self, x0: f64, slope: f64) {
        let v = self.eval(x0);
        let idx = self.segment_index(x0);
        self.segments.truncate(idx + 1);
        self.breakpoints.truncate(idx);
        let tail = Segment {
            a: 0.0,
            b: slope,
            c: v - slope * x0,
        };
        let last = self.breakpoints.len();
        if !self.breakpoints.is_empty()
            && (self.breakpoints[last - 1] - x0).abs() <= self.merge_tol
        {
            self.segments[last] = tail;
        } else if segments_equal(&self.segments[last], &tail) {
            // Already linear at the target slope.
        } else {
            self.breakpoints.push(x0);
            self.segments.push(tail);
        }
    }

    /// Leftmost and rightmost minimizers.
    pub fn min_interval(&self) -> (f64, f64) {
        self.crossing_interval(0.0)
    }

    /// Minimizer closest to zero; among a tie interval containing zero
    /// this returns exactly 0.
    pub fn argmin_zero_pref(&self) -> f64 {
        let (lo, hi) = self.min_interval();
        zero_pref(lo, hi)
    }

    /// Debug-only structural validation: convexity and continuity.
    #[cfg(test)]
    pub fn check_invariants(&self) {
        assert_eq!(self.segments.len(), self.breakpoints.len() + 1);
        for w in self.breakpoints.windows(2) {
            assert!(w[0] < w[1], "breakpoints not increasing: {w:?}");
        }
        for seg in &self.segments {
            assert!(seg.a >= -1e-12, "negative curvature: {seg:?}");
        }
        for (i, &bp) in self.breakpoints.iter().enumerate() {
            let l = &self.segments[i];
            let r = &self.segments[i + 1];
            let fv = l.eval(bp);
            let gv = r.eval(bp);
            let scale = 1.0 + fv.abs().max(gv.abs());
            assert!(
                (fv - gv).abs() <= 1e-9 * scale,
                "discontinuity at {bp}: {fv} vs {gv}"
            );
            assert!(
                l.deriv(bp) <= r.deriv(bp) + 1e-9 * (1.0 + l.deriv(bp).abs()),
                "derivative decreases at {bp}"
            );
        }
    }
}

fn segments_equal(a: &Segment, b: &Segment) -> bool {
    a.a == b.a && a.b == b.b && a.c == b.c
}

/// Point of `[lo, hi]` closest to zero.
pub fn zero_pref(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if lo <= 0.0 && 0.0 <= hi {
        0.0
    } else if hi < 0.0 {
        hi
    } else {
        lo
    }
}

/// Conditional minimizer selection for the backward pass: given the
/// downstream value `t` and the clip crossings of this stage's message,
/// pick the zero-preferring point of the interval of minimizers of
/// `f(u) + lambda2 * |t - u|`.
pub fn backward_select(info: &ClipInterval, t: f64) -> f64 {
    if t >= info.pos_lo {
        zero_pref(info.pos_lo, info.pos_hi.min(t))
    } else if t <= info.neg_hi {
        zero_pref(info.neg_lo.max(t), info.neg_hi)
    } else {
        t
    }
}
