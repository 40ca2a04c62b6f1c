//! Cosine-modulated analysis filter bank.
//!
//! A single linear-phase lowpass prototype `p(n)` of length `L` is designed
//! with a Kaiser window, then modulated into `N` bandpass analysis filters
//!
//! ```text
//! h_i(n) = 2 p(n) cos( (π/N)(i + 0.5)(n − (L−1)/2) + (−1)^i π/4 )
//! ```
//!
//! The prototype cutoff is tuned so that `Σ_i |H_i(e^{jω})|²` is as flat as
//! possible (power complementarity). Only the analysis side is provided;
//! weight adaptation never needs the synthesis bank.
//!
//! [`SubbandAnalyzer`] filters a fullband stream into `N` non-decimated
//! subband streams and [`frame`] samples them at the decimated instants
//! `kN` to build the per-block regressors.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Frequency grid used for all reported filter-bank quality figures.
pub const QUALITY_GRID: usize = 4096;

const SEARCH_GRID: usize = 1024;
const MAX_RIPPLE_DB: f64 = 1.0;

/// Linear-phase lowpass prototype for an `N`-band cosine-modulated bank.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coefficients: Vec<f64>,
    subbands: usize,
}

impl PrototypeFilter {
    /// Wraps existing taps, e.g. a published prototype loaded from disk.
    ///
    /// Taps must be finite, symmetric to within `1e-12` of the largest tap and
    /// their count a positive multiple of `2 * subbands`.
    pub fn new(coefficients: Vec<f64>, subbands: usize) -> Result<Self> {
        check_sizes(subbands, coefficients.len())?;
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::param(format!("prototype tap {i} is not finite")));
        }
        let peak = coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let l = coefficients.len();
        for n in 0..l / 2 {
            if (coefficients[n] - coefficients[l - 1 - n]).abs() > 1e-12 * peak {
                return Err(Error::param(format!(
                    "prototype is not linear phase: p[{n}] != p[{}]",
                    l - 1 - n
                )));
            }
        }
        Ok(Self {
            coefficients,
            subbands,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn taps(&self) -> usize {
        self.coefficients.len()
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    /// Stopband edge used when measuring attenuation: the nominal band edge
    /// `π/(2N)` plus a transition allowance of `1.2·π/(2N)`.
    pub fn stopband_edge(&self) -> f64 {
        stopband_edge(self.subbands)
    }

    /// Attenuation in dB of the stopband peak relative to the DC gain,
    /// measured on a [`QUALITY_GRID`]-point grid over `[0, π]`.
    pub fn stopband_attenuation_db(&self) -> f64 {
        let grid = ResponseGrid::new(QUALITY_GRID, self.taps());
        grid.stopband_attenuation_db(&self.coefficients, self.stopband_edge())
    }
}

fn check_sizes(subbands: usize, taps: usize) -> Result<()> {
    if subbands < 2 {
        return Err(Error::param(format!(
            "subband count N must be at least 2 (got {subbands})"
        )));
    }
    if taps == 0 || !taps.is_multiple_of(2 * subbands) {
        return Err(Error::param(format!(
            "prototype length L must be a positive multiple of 2N = {} (got L={taps})",
            2 * subbands
        )));
    }
    Ok(())
}

fn stopband_edge(subbands: usize) -> f64 {
    let half_band = PI / (2.0 * subbands as f64);
    half_band + 1.2 * half_band
}

/// Kaiser's empirical window shape for a given stopband attenuation.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db > 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser-windowed sinc lowpass with cutoff `cutoff` rad/sample, DC gain 1.
///
/// Only the first half is computed; the second half is mirrored so the taps
/// are exactly symmetric.
fn windowed_sinc(taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let centre = (taps as f64 - 1.0) / 2.0;
    let norm = bessel_i0(beta);
    let mut h = vec![0.0; taps];
    for n in 0..taps.div_ceil(2) {
        let t = n as f64 - centre;
        let sinc = if t == 0.0 {
            cutoff / PI
        } else {
            (cutoff * t).sin() / (PI * t)
        };
        let r = (n as f64 - centre) / centre.max(f64::MIN_POSITIVE);
        let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
        h[n] = sinc * window;
        h[taps - 1 - n] = h[n];
    }
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Precomputed `cos(ωn)`, `sin(ωn)` over a uniform grid on `[0, π]`.
pub(crate) struct ResponseGrid {
    points: usize,
    taps: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl ResponseGrid {
    pub(crate) fn new(points: usize, taps: usize) -> Self {
        let mut cos = Vec::with_capacity(points * taps);
        let mut sin = Vec::with_capacity(points * taps);
        for g in 0..points {
            let w = Self::omega_of(g, points);
            for n in 0..taps {
                let (s, c) = (w * n as f64).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self {
            points,
            taps,
            cos,
            sin,
        }
    }

    fn omega_of(g: usize, points: usize) -> f64 {
        PI * g as f64 / (points - 1) as f64
    }

    fn omega(&self, g: usize) -> f64 {
        Self::omega_of(g, self.points)
    }

    fn power(&self, g: usize, h: &[f64]) -> f64 {
        let row = g * self.taps;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &c) in h.iter().enumerate() {
            re += c * self.cos[row + n];
            im += c * self.sin[row + n];
        }
        re * re + im * im
    }

    fn stopband_attenuation_db(&self, h: &[f64], edge: f64) -> f64 {
        let dc = self.power(0, h);
        let peak = (0..self.points)
            .filter(|&g| self.omega(g) >= edge)
            .map(|g| self.power(g, h))
            .fold(0.0f64, f64::max);
        -10.0 * (peak / dc).log10()
    }

    /// Peak-to-peak ripple in dB of `Σ_i |H_i|²`.
    fn ripple_db(&self, filters: &[Vec<f64>]) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for g in 0..self.points {
            let s: f64 = filters.iter().map(|h| self.power(g, h)).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        10.0 * (hi / lo).log10()
    }
}

struct Candidate {
    prototype: Vec<f64>,
    ripple_db: f64,
    attenuation_db: f64,
}

fn bank_ripple(proto: &[f64], subbands: usize, grid: &ResponseGrid) -> f64 {
    grid.ripple_db(&modulate_taps(proto, subbands))
}

/// Minimizes power-complementarity ripple over the prototype cutoff: a coarse
/// scan brackets the minimum, golden-section search refines it.
fn tune_cutoff(subbands: usize, taps: usize, beta: f64, grid: &ResponseGrid) -> f64 {
    let nominal = PI / (2.0 * subbands as f64);
    let (lo, hi) = (0.5 * nominal, 2.0 * nominal);
    let steps = 48;
    let step = (hi - lo) / steps as f64;
    let ripple_at = |fc: f64| bank_ripple(&windowed_sinc(taps, fc, beta), subbands, grid);

    let best = (0..=steps)
        .map(|s| lo + s as f64 * step)
        .map(|fc| (fc, ripple_at(fc)))
        .fold(
            (lo, f64::INFINITY),
            |acc, c| if c.1 < acc.1 { c } else { acc },
        );

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ripple_at(c), ripple_at(d));
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ripple_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ripple_at(d);
        }
    }
    let mid = 0.5 * (a + b);
    if ripple_at(mid) <= best.1 {
        mid
    } else {
        best.0
    }
}

fn candidate(subbands: usize, taps: usize, beta: f64, search: &ResponseGrid) -> Candidate {
    let cutoff = tune_cutoff(subbands, taps, beta, search);
    let prototype = windowed_sinc(taps, cutoff, beta);
    let ripple_db = bank_ripple(&prototype, subbands, search);
    let attenuation_db = search.stopband_attenuation_db(&prototype, stopband_edge(subbands));
    Candidate {
        prototype,
        ripple_db,
        attenuation_db,
    }
}

/// Designs a Kaiser-window prototype for an `N`-band pseudo-QMF bank.
///
/// The window shape starts from Kaiser's formula for `target_attenuation_db`.
/// If the target is missed at that shape, shapes within ±2 of it are scanned
/// and the one with the highest attenuation whose bank ripple stays under
/// 1 dB wins. A best result short of 90% of the target (in dB) is reported
/// as [`Error::Design`].
pub fn design_prototype(
    subbands: usize,
    taps: usize,
    target_attenuation_db: f64,
) -> Result<PrototypeFilter> {
    check_sizes(subbands, taps)?;
    if !(target_attenuation_db > 0.0 && target_attenuation_db.is_finite()) {
        return Err(Error::param(format!(
            "target attenuation must be positive (got {target_attenuation_db})"
        )));
    }
    let search = ResponseGrid::new(SEARCH_GRID, taps);
    let beta0 = kaiser_beta(target_attenuation_db);

    let first = candidate(subbands, taps, beta0, &search);
    if first.attenuation_db >= target_attenuation_db && first.ripple_db <= MAX_RIPPLE_DB {
        return Ok(PrototypeFilter {
            coefficients: first.prototype,
            subbands,
        });
    }

    let mut best: Option<Candidate> = (first.ripple_db <= MAX_RIPPLE_DB).then_some(first);
    for s in -16..=16 {
        let beta = beta0 + 0.125 * s as f64;
        if beta < 0.0 || s == 0 {
            continue;
        }
        let c = candidate(subbands, taps, beta, &search);
        if c.ripple_db > MAX_RIPPLE_DB {
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| c.attenuation_db > b.attenuation_db)
        {
            best = Some(c);
        }
    }

    match best {
        Some(b) if b.attenuation_db >= 0.9 * target_attenuation_db => Ok(PrototypeFilter {
            coefficients: b.prototype,
            subbands,
        }),
        other => Err(Error::Design {
            target_db: target_attenuation_db,
            best_db: other.map_or(0.0, |b| b.attenuation_db),
            taps,
        }),
    }
}

fn modulate_taps(prototype: &[f64], subbands: usize) -> Vec<Vec<f64>> {
    let l = prototype.len();
    let centre = (l as f64 - 1.0) / 2.0;
    let nf = subbands as f64;
    (0..subbands)
        .map(|i| {
            let phase = if i % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
            prototype
                .iter()
                .enumerate()
                .map(|(n, &p)| {
                    2.0 * p * ((PI / nf) * (i as f64 + 0.5) * (n as f64 - centre) + phase).cos()
                })
                .collect()
        })
        .collect()
}

/// Cosine-modulates a prototype into its `N` analysis filters.
pub fn modulate(prototype: &PrototypeFilter) -> AnalysisBank {
    AnalysisBank {
        filters: modulate_taps(&prototype.coefficients, prototype.subbands),
    }
}

/// `N` FIR analysis filters of common length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBank {
    filters: Vec<Vec<f64>>,
}

impl AnalysisBank {
    /// Builds a bank from explicit filters. A single filter `[1.0]` gives the
    /// degenerate one-band (fullband NLMS) structure.
    pub fn from_filters(filters: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = filters.first() else {
            return Err(Error::param("analysis bank needs at least one filter"));
        };
        let taps = first.len();
        if taps == 0 {
            return Err(Error::param("analysis filters must have at least one tap"));
        }
        if filters.iter().any(|f| f.len() != taps) {
            return Err(Error::param("analysis filters must share one length"));
        }
        if filters.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::param("analysis filter taps must be finite"));
        }
        Ok(Self { filters })
    }

    pub fn subbands(&self) -> usize {
        self.filters.len()
    }

    pub fn taps(&self) -> usize {
        self.filters[0].len()
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// Peak-to-peak ripple (dB) of `Σ_i |H_i(e^{jω})|²` on `[0, π]`.
    pub fn power_complementarity_ripple_db(&self) -> f64 {
        ResponseGrid::new(QUALITY_GRID, self.taps()).ripple_db(&self.filters)
    }
}

/// Streaming analysis filtering with zero initial history.
///
/// Feeding a signal in arbitrary chunks produces bit-identical output to a
/// single call, since every output sample is summed in the same tap order.
#[derive(Debug, Clone)]
pub struct SubbandAnalyzer {
    bank: AnalysisBank,
    history: Vec<f64>,
}

impl SubbandAnalyzer {
    pub fn new(bank: AnalysisBank) -> Self {
        let history = vec![0.0; bank.taps() - 1];
        Self { bank, history }
    }

    pub fn bank(&self) -> &AnalysisBank {
        &self.bank
    }

    /// Filters `chunk`, appending one output sample per input sample to each
    /// of the `N` vectors in `out`.
    pub fn process_into(&mut self, chunk: &[f64], out: &mut [Vec<f64>]) {
        assert_eq!(out.len(), self.bank.subbands(), "one output per subband");
        let keep = self.history.len();
        let mut buf = Vec::with_capacity(keep + chunk.len());
        buf.extend_from_slice(&self.history);
        buf.extend_from_slice(chunk);
        for (filter, dst) in self.bank.filters.iter().zip(out.iter_mut()) {
            dst.reserve(chunk.len());
            for p in 0..chunk.len() {
                let newest = keep + p;
                let mut acc = 0.0;
                for (j, &h) in filter.iter().enumerate() {
                    acc += h * buf[newest - j];
                }
                dst.push(acc);
            }
        }
        self.history.copy_from_slice(&buf[buf.len() - keep..]);
    }

    pub fn process(&mut self, chunk: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.bank.subbands()];
        self.process_into(chunk, &mut out);
        out
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// One-shot causal analysis filtering; output `i` has the input's length.
pub fn analyze(bank: &AnalysisBank, fullband: &[f64]) -> Vec<Vec<f64>> {
    SubbandAnalyzer::new(bank.clone()).process(fullband)
}

/// Regressors, decimated desired samples and regressor energies at block `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    block: usize,
    regressors: Vec<Vec<f64>>,
    desired: Vec<f64>,
    energies: Vec<f64>,
}

impl SubbandFrame {
    /// Builds a frame from explicit per-subband regressors and desired samples.
    pub fn new(block: usize, regressors: Vec<Vec<f64>>, desired: Vec<f64>) -> Result<Self> {
        if regressors.is_empty() || regressors.len() != desired.len() {
            return Err(Error::param(format!(
                "frame needs one desired sample per regressor ({} regressors, {} samples)",
                regressors.len(),
                desired.len()
            )));
        }
        let m = regressors[0].len();
        if m == 0 || regressors.iter().any(|r| r.len() != m) {
            return Err(Error::param("regressors must share a positive length"));
        }
        let energies = regressors.iter().map(|r| energy(r)).collect();
        Ok(Self {
            block,
            regressors,
            desired,
            energies,
        })
    }

    fn zeroed(subbands: usize, m: usize) -> Self {
        Self {
            block: 0,
            regressors: vec![vec![0.0; m]; subbands],
            desired: vec![0.0; subbands],
            energies: vec![0.0; subbands],
        }
    }

    /// Re-samples the streams at block `k` into this frame's buffers.
    fn fill(&mut self, u_streams: &[Vec<f64>], d_streams: &[Vec<f64>], k: usize) {
        let n = u_streams.len();
        let t = k * n;
        for i in 0..n {
            let src = &u_streams[i];
            let dst = &mut self.regressors[i];
            for (j, slot) in dst.iter_mut().enumerate() {
                *slot = if j <= t { src[t - j] } else { 0.0 };
            }
            self.energies[i] = energy(dst);
            self.desired[i] = d_streams[i][t];
        }
        self.block = k;
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn subbands(&self) -> usize {
        self.regressors.len()
    }

    pub fn filter_len(&self) -> usize {
        self.regressors[0].len()
    }

    pub fn regressors(&self) -> &[Vec<f64>] {
        &self.regressors
    }

    pub fn regressor(&self, i: usize) -> &[f64] {
        &self.regressors[i]
    }

    pub fn desired(&self) -> &[f64] {
        &self.desired
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn check_frame_inputs(
    u_streams: &[Vec<f64>],
    d_streams: &[Vec<f64>],
    k: usize,
    m: usize,
) -> Result<()> {
    if m == 0 {
        return Err(Error::param("filter length M must be positive"));
    }
    let n = u_streams.len();
    if n == 0 || d_streams.len() != n {
        return Err(Error::param(format!(
            "need matching non-empty subband sets (u: {n}, d: {})",
            d_streams.len()
        )));
    }
    let t = k * n;
    if u_streams.iter().chain(d_streams).any(|s| s.len() <= t) {
        return Err(Error::param(format!(
            "block {k} needs subband samples up to time {t}"
        )));
    }
    Ok(())
}

/// Builds `u_i(k) = [u_i(kN), …, u_i(kN−M+1)]` and `d_{i,D}(k) = d_i(kN)` from
/// non-decimated subband streams. Samples before time 0 read as zero.
pub fn frame(
    u_streams: &[Vec<f64>],
    d_streams: &[Vec<f64>],
    k: usize,
    m: usize,
) -> Result<SubbandFrame> {
    check_frame_inputs(u_streams, d_streams, k, m)?;
    let mut f = SubbandFrame::zeroed(u_streams.len(), m);
    f.fill(u_streams, d_streams, k);
    Ok(f)
}

/// Iterates the frames of all complete blocks, reusing one buffer.
pub struct FrameCursor<'a> {
    u_streams: &'a [Vec<f64>],
    d_streams: &'a [Vec<f64>],
    frame: SubbandFrame,
    next: usize,
    blocks: usize,
}

impl<'a> FrameCursor<'a> {
    pub fn new(u_streams: &'a [Vec<f64>], d_streams: &'a [Vec<f64>], m: usize) -> Result<Self> {
        check_frame_inputs(u_streams, d_streams, 0, m)?;
        let len = u_streams
            .iter()
            .chain(d_streams)
            .map(Vec::len)
            .min()
            .unwrap_or(0);
        Ok(Self {
            u_streams,
            d_streams,
            frame: SubbandFrame::zeroed(u_streams.len(), m),
            next: 0,
            blocks: len / u_streams.len(),
        })
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Advances to the next block; `None` once every block has been visited.
    pub fn advance(&mut self) -> Option<&SubbandFrame> {
        if self.next >= self.blocks {
            return None;
        }
        self.frame.fill(self.u_streams, self.d_streams, self.next);
        self.next += 1;
        Some(&self.frame)
    }
}

/// Writes a prototype in the plain-text coefficient format.
pub fn write_coefficients(path: &Path, prototype: &PrototypeFilter) -> Result<()> {
    fs::write(path, format_coefficients(prototype)).map_err(|e| Error::io(path, e))
}

pub fn format_coefficients(prototype: &PrototypeFilter) -> String {
    let mut s = format!(
        "# prototype N={} L={}\n",
        prototype.subbands,
        prototype.taps()
    );
    for c in &prototype.coefficients {
        let _ = writeln!(s, "{c}");
    }
    s
}

/// Reads a prototype written by [`write_coefficients`].
pub fn read_coefficients(path: &Path) -> Result<PrototypeFilter> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coefficients(&text).map_err(|(line, message)| Error::Input {
        path: path.to_path_buf(),
        line,
        message,
    })
}

fn parse_coefficients(text: &str) -> std::result::Result<PrototypeFilter, (usize, String)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim())
        .ok_or((1, "empty coefficient file".to_string()))?;
    let (n, l) = parse_header(header).ok_or((
        1,
        format!("expected `# prototype N=<n> L=<l>` header, found `{header}`"),
    ))?;
    let mut coefficients = Vec::with_capacity(l);
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| (idx + 1, format!("not a number: `{line}`")))?;
        if !v.is_finite() {
            return Err((idx + 1, "coefficient is not finite".into()));
        }
        coefficients.push(v);
    }
    if coefficients.len() != l {
        return Err((
            1,
            format!(
                "header declares L={l} but {} coefficients follow",
                coefficients.len()
            ),
        ));
    }
    PrototypeFilter::new(coefficients, n).map_err(|e| (1, e.to_string()))
}

fn parse_header(header: &str) -> Option<(usize, usize)> {
    let rest = header.strip_prefix('#')?.trim().strip_prefix("prototype")?;
    let mut n = None;
    let mut l = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("N=") {
            n = v.parse().ok();
        } else if let Some(v) = field.strip_prefix("L=") {
            l = v.parse().ok();
        }
    }
    Some((n?, l?))
}
