//! Characteristic sequences and matrices, and branch-free word-level
//! implementations of every connective.
//!
//! A characteristic sequence (CS) is one `u64` per trace. Position `j` of the
//! trace lives at bit `63 - j`, so `x << k` moves the value at position
//! `j + k` into position `j`, and bits at positions `>= len` are always zero.
//! A characteristic matrix (CM) stacks the CSs of all traces of a
//! specification in row order.

use std::fmt::Write as _;

use crate::formula::{Connective, Formula, PropId};
use crate::trace::{Specification, Trace, MAX_TRACE_LEN};
use crate::Error;

/// Shift-or rounds needed to propagate across a full 64-bit word.
pub const PROPAGATION_ROUNDS: u32 = 6;

/// Per-thread count of executed F and U propagation rounds.
#[cfg(feature = "instrument")]
pub mod instrument {
    use std::cell::Cell;

    thread_local! {
        static ROUNDS: Cell<u64> = const { Cell::new(0) };
    }

    /// Returns the rounds executed on this thread since the last call.
    pub fn take_rounds() -> u64 {
        ROUNDS.with(|c| c.replace(0))
    }

    #[inline]
    pub(crate) fn tick() {
        ROUNDS.with(|c| c.set(c.get() + 1));
    }
}

/// Valid positions `0..len` of a trace.
#[inline]
pub fn row_mask(len: usize) -> u64 {
    debug_assert!(len <= MAX_TRACE_LEN);
    if len == 0 {
        0
    } else {
        !0u64 << (64 - len)
    }
}

#[inline]
pub fn position_bit(j: usize) -> u64 {
    1u64 << (63 - j)
}

/// `⌈log2 len⌉`, the number of rounds a trace of that length needs.
pub fn rounds_for_len(len: usize) -> u32 {
    if len <= 1 {
        0
    } else {
        usize::BITS - (len - 1).leading_zeros()
    }
}

#[inline]
pub fn cs_not(x: u64, mask: u64) -> u64 {
    !x & mask
}

#[inline]
pub fn cs_next(x: u64) -> u64 {
    x << 1
}

#[inline]
pub fn cs_finally(x: u64) -> u64 {
    finally_rounds(x, PROPAGATION_ROUNDS, |_, _| {})
}

/// `x |= x << 2^i` for `i` in `0..rounds`, reporting each intermediate state.
#[inline]
pub fn finally_rounds(mut x: u64, rounds: u32, mut observe: impl FnMut(u32, u64)) -> u64 {
    for i in 0..rounds {
        #[cfg(feature = "instrument")]
        instrument::tick();
        x |= x << (1u32 << i);
        observe(i, x);
    }
    x
}

/// `G x` as `¬F¬x` within the mask; zeros shifted in past the end never count
/// as violations.
#[inline]
pub fn cs_globally(x: u64, mask: u64) -> u64 {
    mask & !cs_finally(mask & !x)
}

#[inline]
pub fn cs_until(x: u64, y: u64) -> u64 {
    until_rounds(x, y, PROPAGATION_ROUNDS, |_| {})
}

/// One assignment of the `U` propagation loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UntilStep {
    /// `y |= x & (y << 2^round)`; carries the new `(x, y)`.
    Reach { round: u32, x: u64, y: u64 },
    /// `x &= x << 2^round`.
    Hold { round: u32, x: u64, y: u64 },
}

/// Exponential propagation for `x U y`.
///
/// After round `i`, `y` holds `x U≤2^(i+1) y` and `x` holds `G≥2^(i+1) x`. The
/// `x` update of the final round is never read and is skipped.
#[inline]
pub fn until_rounds(mut x: u64, mut y: u64, rounds: u32, mut observe: impl FnMut(UntilStep)) -> u64 {
    for i in 0..rounds {
        #[cfg(feature = "instrument")]
        instrument::tick();
        let s = 1u32 << i;
        y |= x & (y << s);
        observe(UntilStep::Reach { round: i, x, y });
        if i + 1 < rounds {
            x &= x << s;
            observe(UntilStep::Hold { round: i, x, y });
        }
    }
    y
}

/// Row masks and polarity split of a specification, shared by every CM over it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    masks: Vec<u64>,
    lens: Vec<usize>,
    positives: usize,
}

impl Layout {
    pub fn new(spec: &Specification) -> Result<Self, Error> {
        let lens: Vec<usize> = spec.traces().map(Trace::len).collect();
        if let Some(&got) = lens.iter().find(|&&l| l > MAX_TRACE_LEN) {
            return Err(Error::TraceTooLong {
                got,
                limit: MAX_TRACE_LEN,
            });
        }
        Ok(Layout {
            masks: lens.iter().map(|&l| row_mask(l)).collect(),
            lens,
            positives: spec.positives().len(),
        })
    }

    pub fn rows(&self) -> usize {
        self.masks.len()
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn lens(&self) -> &[usize] {
        &self.lens
    }

    /// Number of in-range bits across all rows.
    pub fn live_bits(&self) -> usize {
        self.lens.iter().sum()
    }

    /// Row `i` has bit `j` set iff proposition `prop` holds at position `j`.
    pub fn atom_rows(&self, spec: &Specification, prop: PropId, out: &mut [u64]) {
        for (row, tr) in out.iter_mut().zip(spec.traces()) {
            *row = tr
                .chars()
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(prop))
                .fold(0, |acc, (j, _)| acc | position_bit(j));
        }
    }

    /// Every positive row holds at position 0 and every negative row fails.
    #[inline]
    pub fn separates(&self, rows: &[u64]) -> bool {
        let (p, n) = rows.split_at(self.positives);
        p.iter().all(|&r| r & position_bit(0) != 0) && n.iter().all(|&r| r & position_bit(0) == 0)
    }

    /// Rows whose verdict at position 0 disagrees with their polarity.
    #[inline]
    pub fn error_count(&self, rows: &[u64]) -> usize {
        let (p, n) = rows.split_at(self.positives);
        p.iter().filter(|&&r| r & position_bit(0) == 0).count()
            + n.iter().filter(|&&r| r & position_bit(0) != 0).count()
    }

    /// Indices of rows that hold at position 0.
    pub fn accepted(&self, rows: &[u64]) -> Vec<usize> {
        rows.iter()
            .enumerate()
            .filter(|(_, &r)| r & position_bit(0) != 0)
            .map(|(i, _)| i)
            .collect()
    }

    #[inline]
    fn check_closed(&self, rows: &[u64]) {
        debug_assert!(
            rows.iter().zip(&self.masks).all(|(r, m)| r & !m == 0),
            "out-of-range bits set"
        );
    }
}

/// Applies a unary connective row by row.
#[inline]
pub fn apply_unary(op: Connective, x: &[u64], layout: &Layout, out: &mut [u64]) {
    let masks = layout.masks();
    match op {
        Connective::Not => {
            for ((o, &a), &m) in out.iter_mut().zip(x).zip(masks) {
                *o = cs_not(a, m);
            }
        }
        Connective::Next => {
            for (o, &a) in out.iter_mut().zip(x) {
                *o = cs_next(a);
            }
        }
        Connective::Finally => {
            for (o, &a) in out.iter_mut().zip(x) {
                *o = cs_finally(a);
            }
        }
        Connective::Globally => {
            for ((o, &a), &m) in out.iter_mut().zip(x).zip(masks) {
                *o = cs_globally(a, m);
            }
        }
        _ => panic!("{op:?} is not unary"),
    }
    layout.check_closed(out);
}

/// Applies a binary connective row by row.
#[inline]
pub fn apply_binary(op: Connective, x: &[u64], y: &[u64], layout: &Layout, out: &mut [u64]) {
    match op {
        Connective::And => {
            for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                *o = a & b;
            }
        }
        Connective::Or => {
            for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                *o = a | b;
            }
        }
        Connective::Until => {
            for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                *o = cs_until(a, b);
            }
        }
        _ => panic!("{op:?} is not binary"),
    }
    layout.check_closed(out);
}

/// A characteristic matrix tied to the layout it was built for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharMatrix {
    rows: Vec<u64>,
}

impl CharMatrix {
    pub fn from_rows(rows: Vec<u64>, layout: &Layout) -> Result<Self, Error> {
        if rows.len() != layout.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for a layout of {}",
                rows.len(),
                layout.rows()
            )));
        }
        if rows.iter().zip(layout.masks()).any(|(r, m)| r & !m != 0) {
            return Err(Error::ShapeMismatch("bits set past the end of a trace".into()));
        }
        Ok(CharMatrix { rows })
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn atom(spec: &Specification, layout: &Layout, prop: PropId) -> Self {
        let mut rows = vec![0; layout.rows()];
        layout.atom_rows(spec, prop, &mut rows);
        CharMatrix { rows }
    }

    /// Row `i` equals the validity mask of trace `i`.
    pub fn tautology(layout: &Layout) -> Self {
        CharMatrix {
            rows: layout.masks().to_vec(),
        }
    }

    fn unary(&self, op: Connective, layout: &Layout) -> Result<Self, Error> {
        self.check_shape(layout)?;
        let mut rows = vec![0; self.rows.len()];
        apply_unary(op, &self.rows, layout, &mut rows);
        Ok(CharMatrix { rows })
    }

    fn binary(&self, op: Connective, other: &Self, layout: &Layout) -> Result<Self, Error> {
        self.check_shape(layout)?;
        other.check_shape(layout)?;
        let mut rows = vec![0; self.rows.len()];
        apply_binary(op, &self.rows, &other.rows, layout, &mut rows);
        Ok(CharMatrix { rows })
    }

    fn check_shape(&self, layout: &Layout) -> Result<(), Error> {
        if self.rows.len() == layout.rows() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "matrix has {} rows, layout has {}",
                self.rows.len(),
                layout.rows()
            )))
        }
    }

    pub fn bf_not(&self, layout: &Layout) -> Result<Self, Error> {
        self.unary(Connective::Not, layout)
    }

    pub fn bf_next(&self, layout: &Layout) -> Result<Self, Error> {
        self.unary(Connective::Next, layout)
    }

    pub fn bf_finally(&self, layout: &Layout) -> Result<Self, Error> {
        self.unary(Connective::Finally, layout)
    }

    pub fn bf_globally(&self, layout: &Layout) -> Result<Self, Error> {
        self.unary(Connective::Globally, layout)
    }

    pub fn bf_and(&self, other: &Self, layout: &Layout) -> Result<Self, Error> {
        self.binary(Connective::And, other, layout)
    }

    pub fn bf_or(&self, other: &Self, layout: &Layout) -> Result<Self, Error> {
        self.binary(Connective::Or, other, layout)
    }

    pub fn bf_until(&self, other: &Self, layout: &Layout) -> Result<Self, Error> {
        self.binary(Connective::Until, other, layout)
    }

    pub fn separates(&self, layout: &Layout) -> bool {
        layout.separates(&self.rows)
    }

    pub fn error_count(&self, layout: &Layout) -> usize {
        layout.error_count(&self.rows)
    }

    /// One line per row, `.` marking positions past the end of the trace.
    pub fn dump(&self, layout: &Layout) -> String {
        let width = layout.lens().iter().copied().max().unwrap_or(0);
        let mut out = String::new();
        for (&row, &len) in self.rows.iter().zip(layout.lens()) {
            writeln!(out, "{}", render_row(row, len, width)).unwrap();
        }
        out
    }
}

/// Renders positions `0..width` left to right.
pub fn render_row(row: u64, len: usize, width: usize) -> String {
    (0..width)
        .map(|j| {
            if j >= len {
                '.'
            } else if row & position_bit(j) != 0 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Parses a `0`/`1` string (position 0 first) into a CS word.
pub fn parse_row(bits: &str) -> u64 {
    bits.bytes()
        .enumerate()
        .filter(|(_, b)| *b == b'1')
        .fold(0, |acc, (j, _)| acc | position_bit(j))
}

/// Characteristic matrix of an arbitrary formula.
pub fn eval_formula(f: &Formula, spec: &Specification, layout: &Layout) -> CharMatrix {
    let rows = layout.rows();
    let mut out = vec![0; rows];
    match f {
        Formula::Atom(p) => layout.atom_rows(spec, *p, &mut out),
        Formula::Not(x) | Formula::Next(x) | Formula::Finally(x) | Formula::Globally(x) => {
            let inner = eval_formula(x, spec, layout);
            apply_unary(f.connective(), &inner.rows, layout, &mut out);
        }
        Formula::And(x, y) | Formula::Or(x, y) | Formula::Until(x, y) => {
            let l = eval_formula(x, spec, layout);
            let r = eval_formula(y, spec, layout);
            apply_binary(f.connective(), &l.rows, &r.rows, layout, &mut out);
        }
    }
    CharMatrix { rows: out }
}

/// Characteristic sequences of `f` over arbitrary traces, one word per trace.
pub fn eval_on(f: &Formula, traces: &[Trace]) -> Vec<u64> {
    let masks: Vec<u64> = traces.iter().map(|t| row_mask(t.len())).collect();
    eval_rows(f, traces, &masks)
}

fn eval_rows(f: &Formula, traces: &[Trace], masks: &[u64]) -> Vec<u64> {
    match f {
        Formula::Atom(p) => traces
            .iter()
            .map(|tr| {
                tr.chars()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(*p))
                    .fold(0, |acc, (j, _)| acc | position_bit(j))
            })
            .collect(),
        Formula::Not(x) => {
            let a = eval_rows(x, traces, masks);
            a.iter().zip(masks).map(|(&r, &m)| cs_not(r, m)).collect()
        }
        Formula::Next(x) => eval_rows(x, traces, masks).into_iter().map(cs_next).collect(),
        Formula::Finally(x) => eval_rows(x, traces, masks).into_iter().map(cs_finally).collect(),
        Formula::Globally(x) => {
            let a = eval_rows(x, traces, masks);
            a.iter().zip(masks).map(|(&r, &m)| cs_globally(r, m)).collect()
        }
        Formula::And(x, y) | Formula::Or(x, y) | Formula::Until(x, y) => {
            let a = eval_rows(x, traces, masks);
            let b = eval_rows(y, traces, masks);
            let op = f.connective();
            a.iter()
                .zip(&b)
                .map(|(&l, &r)| match op {
                    Connective::And => l & r,
                    Connective::Or => l | r,
                    _ => cs_until(l, r),
                })
                .collect()
        }
    }
}

/// Whether each trace satisfies `f`.
pub fn accepts_each(f: &Formula, traces: &[Trace]) -> Vec<bool> {
    eval_on(f, traces).into_iter().map(|r| r & position_bit(0) != 0).collect()
}
