//! Systolic-array GEMM accelerator: functional int32 GEMM, tile timing and the
//! DMA-driven tile executor.
//!
//! Tiling is output-stationary over 16x16 output tiles. Rows of tiles are
//! grouped into blocks of `block_rows` rows whose A slice stays resident in
//! the local buffer. Within a block the executor walks column strips: each
//! strip needs one B panel (`k x 16`), double-buffered so the next panel
//! streams in while the array works. Finished C tiles go back to memory
//! through the same FIFO DMA queue.
//!
//! Operands use a tile-blocked layout, so every A block, B panel and C tile
//! is one contiguous DMA region.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::pcie::Direction;
use crate::sim::{ComponentId, Engine, SimTime};

pub const ELEMENT_BYTES: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SystolicConfig {
    pub rows: u32,
    pub cols: u32,
    pub clock_ghz: f64,
    pub tile_fill_cycles: u64,
    /// Multiplier on per-tile compute time.
    pub compute_scale: f64,
    pub buffer_bytes: u64,
    /// Output rows whose A slice is kept resident (multiple of `rows`).
    pub block_rows: u64,
}

impl Default for SystolicConfig {
    fn default() -> Self {
        SystolicConfig {
            rows: 16,
            cols: 16,
            clock_ghz: 1.0,
            tile_fill_cycles: 32,
            compute_scale: 1.0,
            buffer_bytes: 8 << 20,
            block_rows: 256,
        }
    }
}

impl SystolicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("accel.rows", "array dimensions must be positive"));
        }
        if !(self.compute_scale.is_finite() && self.compute_scale > 0.0) {
            return Err(Error::config(
                "accel.compute_scale",
                format!("must be positive, got {}", self.compute_scale),
            ));
        }
        if !(self.clock_ghz.is_finite() && self.clock_ghz > 0.0) {
            return Err(Error::config("accel.clock_ghz", "must be positive"));
        }
        if self.block_rows == 0 {
            return Err(Error::config("accel.block_rows", "must be positive"));
        }
        Ok(())
    }

    /// Compute time of one output tile in ns (exact).
    pub fn tile_compute_ns(&self, k: u64) -> f64 {
        self.compute_scale * (k + self.tile_fill_cycles) as f64 / self.clock_ghz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmOp {
    pub m: u64,
    pub n: u64,
    pub k: u64,
}

impl GemmOp {
    pub fn new(m: u64, n: u64, k: u64) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!("GEMM dims must be >= 1, got {m}x{n}x{k}")));
        }
        Ok(GemmOp { m, n, k })
    }

    pub fn square(n: u64) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn a_bytes(&self) -> u64 {
        self.m * self.k * ELEMENT_BYTES
    }
    pub fn b_bytes(&self) -> u64 {
        self.k * self.n * ELEMENT_BYTES
    }
    pub fn c_bytes(&self) -> u64 {
        self.m * self.n * ELEMENT_BYTES
    }

    pub fn tiles(&self, cfg: &SystolicConfig) -> u64 {
        self.m.div_ceil(cfg.rows as u64) * self.n.div_ceil(cfg.cols as u64)
    }
}

/// Row-major int32 matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} elements for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.data[r * self.cols + c]
    }
}

/// `C = A * B` with wrapping 32-bit arithmetic.
pub fn gemm_functional(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for p in 0..a.cols {
            let av = a.data[i * a.cols + p];
            if av == 0 {
                continue;
            }
            let brow = &b.data[p * b.cols..(p + 1) * b.cols];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = cv.wrapping_add(av.wrapping_mul(bv));
            }
        }
    }
    Ok(c)
}

/// Cycle-level emulation of the output-stationary array, one output tile at a
/// time. A enters from the left edge and B from the top, each skewed by one
/// cycle per row or column. Returns the product and the array cycles spent.
pub fn gemm_systolic(a: &Matrix, b: &Matrix, cfg: &SystolicConfig) -> Result<(Matrix, u64)> {
    cfg.validate()?;
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (pr, pc, k) = (cfg.rows as usize, cfg.cols as usize, a.cols);
    let mut c = Matrix::zeros(a.rows, b.cols);
    let mut cycles = 0u64;
    let mut a_reg = vec![0i32; pr * pc];
    let mut b_reg = vec![0i32; pr * pc];
    let mut acc = vec![0i32; pr * pc];
    for r0 in (0..a.rows).step_by(pr) {
        for c0 in (0..b.cols).step_by(pc) {
            a_reg.fill(0);
            b_reg.fill(0);
            acc.fill(0);
            let steps = k + pr + pc - 2;
            for t in 0..steps {
                for i in (0..pr).rev() {
                    for j in (0..pc).rev() {
                        let av = if j == 0 {
                            let row = r0 + i;
                            match t.checked_sub(i) {
                                Some(p) if p < k && row < a.rows => a.get(row, p),
                                _ => 0,
                            }
                        } else {
                            a_reg[i * pc + j - 1]
                        };
                        let bv = if i == 0 {
                            let col = c0 + j;
                            match t.checked_sub(j) {
                                Some(p) if p < k && col < b.cols => b.get(p, col),
                                _ => 0,
                            }
                        } else {
                            b_reg[(i - 1) * pc + j]
                        };
                        let x = i * pc + j;
                        acc[x] = acc[x].wrapping_add(av.wrapping_mul(bv));
                        a_reg[x] = av;
                        b_reg[x] = bv;
                    }
                }
            }
            cycles += steps as u64;
            for i in 0..pr.min(a.rows - r0) {
                for j in 0..pc.min(b.cols - c0) {
                    c.data[(r0 + i) * b.cols + c0 + j] = acc[i * pc + j];
                }
            }
        }
    }
    Ok((c, cycles))
}

/// Pure array time, ignoring data movement.
pub fn gemm_compute_time(op: &GemmOp, cfg: &SystolicConfig) -> SimTime {
    SimTime::from_ns_ceil(op.tiles(cfg) as f64 * cfg.tile_compute_ns(op.k))
}

#[derive(Debug, Clone, Default)]
pub struct LocalBuffer {
    pub capacity_bytes: u64,
    pub occupancy_bytes: u64,
    pub peak_bytes: u64,
}

impl LocalBuffer {
    pub fn new(capacity_bytes: u64) -> Self {
        LocalBuffer {
            capacity_bytes,
            ..Default::default()
        }
    }

    pub fn reserve(&mut self, bytes: u64) {
        self.occupancy_bytes += bytes;
        assert!(
            self.occupancy_bytes <= self.capacity_bytes,
            "local buffer overflow: {} > {}",
            self.occupancy_bytes,
            self.capacity_bytes
        );
        self.peak_bytes = self.peak_bytes.max(self.occupancy_bytes);
    }

    pub fn release(&mut self, bytes: u64) {
        self.occupancy_bytes = self
            .occupancy_bytes
            .checked_sub(bytes)
            .expect("local buffer release underflow");
    }
}

/// Where operand and result bytes come from and go to.
pub trait DmaPath {
    /// Duration in ns of one DMA transfer issued at `start`.
    fn transfer_ns(&mut self, start: SimTime, dir: Direction, vaddr: u64, bytes: u64) -> Result<f64>;
}

/// Virtual base addresses of the three operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmLayout {
    pub a_base: u64,
    pub b_base: u64,
    pub c_base: u64,
}

impl GemmLayout {
    /// Packs A, B and C back to back from `base`, page aligned, each padded
    /// to whole 16x16 tiles.
    pub fn packed(op: &GemmOp, base: u64) -> Self {
        let align = |x: u64| x.div_ceil(4096) * 4096;
        let (a, b, _) = Self::padded_bytes(op);
        let a_base = base;
        let b_base = align(a_base + a);
        let c_base = align(b_base + b);
        GemmLayout { a_base, b_base, c_base }
    }

    fn padded_bytes(op: &GemmOp) -> (u64, u64, u64) {
        let m = op.m.div_ceil(16) * 16;
        let n = op.n.div_ceil(16) * 16;
        (m * op.k * ELEMENT_BYTES, n * op.k * ELEMENT_BYTES, m * n * ELEMENT_BYTES)
    }

    pub fn end(&self, op: &GemmOp) -> u64 {
        self.c_base + Self::padded_bytes(op).2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GemmTiming {
    pub total: SimTime,
    pub compute_ns: u64,
    /// Time the DMA queue was busy.
    pub transfer_ns: u64,
    pub bytes_a: u64,
    pub bytes_b: u64,
    pub bytes_c: u64,
    pub peak_buffer_bytes: u64,
    pub block_rows: u64,
}

impl GemmTiming {
    pub fn bytes_h2d(&self) -> u64 {
        self.bytes_a + self.bytes_b
    }
    pub fn bytes_d2h(&self) -> u64 {
        self.bytes_c
    }
}

#[derive(Debug, Clone, Copy)]
enum Tag {
    A { block: usize },
    B { block: usize, strip: u64 },
    C,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    LinkDone(Tag),
    ComputeDone,
}

const DMA: ComponentId = ComponentId(1);
const ARRAY: ComponentId = ComponentId(2);

struct Exec<'a> {
    op: GemmOp,
    layout: GemmLayout,
    path: &'a mut dyn DmaPath,
    buf: LocalBuffer,
    queue: VecDeque<(Direction, u64, u64, Tag)>,
    link_busy: bool,
    // tiling
    tr: u64,
    tc: u64,
    mt: u64,
    nt: u64,
    block_tiles: u64,
    blocks: usize,
    tile_ns: SimTime,
    panel_bytes: u64,
    tile_c_bytes: u64,
    // progress
    block: usize,
    a_ready: bool,
    panels_ready: Vec<bool>,
    strip: u64,
    row: u64,
    array_busy: bool,
    c_slots: u32,
    done: bool,
    out: GemmTiming,
    end: SimTime,
    error: Option<Error>,
}

impl Exec<'_> {
    fn block_row_tiles(&self) -> u64 {
        let first = self.block as u64 * self.block_tiles;
        self.block_tiles.min(self.mt - first)
    }

    fn a_block_bytes(&self) -> u64 {
        let first_row = self.block as u64 * self.block_tiles * self.tr;
        let rows = (self.block_row_tiles() * self.tr).min(self.op.m - first_row);
        rows * self.op.k * ELEMENT_BYTES
    }

    fn panel_bytes(&self, strip: u64) -> u64 {
        let cols = self.tc.min(self.op.n - strip * self.tc);
        cols * self.op.k * ELEMENT_BYTES
    }

    fn enqueue(&mut self, eng: &mut Engine<Ev>, dir: Direction, vaddr: u64, bytes: u64, tag: Tag) {
        self.queue.push_back((dir, vaddr, bytes, tag));
        if !self.link_busy {
            self.start_link(eng);
        }
    }

    fn start_link(&mut self, eng: &mut Engine<Ev>) {
        match self.queue.pop_front() {
            Some((dir, vaddr, bytes, tag)) => {
                self.link_busy = true;
                let d = match self.path.transfer_ns(eng.now(), dir, vaddr, bytes) {
                    Ok(d) => d,
                    Err(e) => {
                        self.error.get_or_insert(e);
                        0.0
                    }
                };
                let d = SimTime::from_ns_ceil(d);
                self.out.transfer_ns += d.0;
                eng.schedule_in(d, DMA, Ev::LinkDone(tag));
            }
            None => self.link_busy = false,
        }
    }

    fn start_block(&mut self, eng: &mut Engine<Ev>) {
        self.a_ready = false;
        self.panels_ready.iter_mut().for_each(|p| *p = false);
        self.strip = 0;
        self.row = 0;
        let a = self.a_block_bytes();
        self.buf.reserve(a);
        self.out.bytes_a += a;
        let first_row = self.block as u64 * self.block_tiles * self.tr;
        let vaddr = self.layout.a_base + first_row * self.op.k * ELEMENT_BYTES;
        self.enqueue(eng, Direction::HostToDevice, vaddr, a, Tag::A { block: self.block });
        for j in 0..self.nt.min(2) {
            self.fetch_panel(eng, j);
        }
    }

    fn fetch_panel(&mut self, eng: &mut Engine<Ev>, strip: u64) {
        let b = self.panel_bytes(strip);
        self.buf.reserve(self.panel_bytes);
        self.out.bytes_b += b;
        let vaddr = self.layout.b_base + strip * self.tc * self.op.k * ELEMENT_BYTES;
        let block = self.block;
        self.enqueue(eng, Direction::HostToDevice, vaddr, b, Tag::B { block, strip });
    }

    fn try_compute(&mut self, eng: &mut Engine<Ev>) {
        if self.array_busy || self.done || !self.a_ready || self.c_slots == 0 {
            return;
        }
        if !self.panels_ready[self.strip as usize] {
            return;
        }
        self.array_busy = true;
        self.c_slots -= 1;
        self.buf.reserve(self.tile_c_bytes);
        self.out.compute_ns += self.tile_ns.0;
        eng.schedule_in(self.tile_ns, ARRAY, Ev::ComputeDone);
    }

    fn handle(&mut self, eng: &mut Engine<Ev>, ev: Ev) {
        match ev {
            Ev::LinkDone(tag) => {
                match tag {
                    Tag::A { block } => {
                        debug_assert_eq!(block, self.block);
                        self.a_ready = true;
                    }
                    Tag::B { block, strip } => {
                        debug_assert_eq!(block, self.block);
                        self.panels_ready[strip as usize] = true;
                    }
                    Tag::C => {
                        self.c_slots += 1;
                        self.buf.release(self.tile_c_bytes);
                        self.end = self.end.max(eng.now());
                    }
                }
                self.start_link(eng);
                self.try_compute(eng);
            }
            Ev::ComputeDone => {
                self.array_busy = false;
                let block_first = self.block as u64 * self.block_tiles;
                let ti = block_first + self.row;
                let vaddr = self.layout.c_base + (ti * self.nt + self.strip) * self.tr * self.tc * ELEMENT_BYTES;
                let rows = self.tr.min(self.op.m - ti * self.tr);
                let cols = self.tc.min(self.op.n - self.strip * self.tc);
                let bytes = rows * cols * ELEMENT_BYTES;
                self.out.bytes_c += bytes;
                self.enqueue(eng, Direction::DeviceToHost, vaddr, bytes, Tag::C);
                self.row += 1;
                if self.row == self.block_row_tiles() {
                    self.row = 0;
                    let j = self.strip;
                    self.buf.release(self.panel_bytes);
                    self.panels_ready[j as usize] = false;
                    self.strip += 1;
                    if j + 2 < self.nt {
                        self.fetch_panel(eng, j + 2);
                    }
                    if self.strip == self.nt {
                        self.buf.release(self.a_block_bytes());
                        self.block += 1;
                        if self.block < self.blocks {
                            self.start_block(eng);
                        } else {
                            self.done = true;
                        }
                    }
                }
                self.try_compute(eng);
            }
        }
    }
}

/// Largest usable block height (in tile rows) that fits the local buffer.
pub fn fit_block_tiles(op: &GemmOp, cfg: &SystolicConfig) -> Result<u64> {
    let tr = cfg.rows as u64;
    let tc = cfg.cols as u64;
    let panel = tc * op.k * ELEMENT_BYTES;
    let fixed = 2 * panel + 2 * tr * tc * ELEMENT_BYTES;
    let per_tile_row = tr * op.k * ELEMENT_BYTES;
    if cfg.buffer_bytes < fixed + per_tile_row {
        return Err(Error::config(
            "accel.buffer_bytes",
            format!(
                "{} bytes cannot hold one tile's operands double-buffered ({} needed for k={})",
                cfg.buffer_bytes,
                fixed + per_tile_row,
                op.k
            ),
        ));
    }
    let want = (cfg.block_rows / tr).max(1);
    let fit = (cfg.buffer_bytes - fixed) / per_tile_row;
    Ok(want.min(fit).min(op.m.div_ceil(tr)))
}

/// Runs one GEMM through the tile executor starting at `start`.
pub fn run_gemm(
    op: &GemmOp,
    cfg: &SystolicConfig,
    layout: &GemmLayout,
    path: &mut dyn DmaPath,
    start: SimTime,
) -> Result<GemmTiming> {
    cfg.validate()?;
    let block_tiles = fit_block_tiles(op, cfg)?;
    let tr = cfg.rows as u64;
    let tc = cfg.cols as u64;
    let mt = op.m.div_ceil(tr);
    let nt = op.n.div_ceil(tc);
    let mut ex = Exec {
        op: *op,
        layout: *layout,
        path,
        buf: LocalBuffer::new(cfg.buffer_bytes),
        queue: VecDeque::new(),
        link_busy: false,
        tr,
        tc,
        mt,
        nt,
        block_tiles,
        blocks: mt.div_ceil(block_tiles) as usize,
        tile_ns: SimTime::from_ns_ceil(cfg.tile_compute_ns(op.k)),
        panel_bytes: tc * op.k * ELEMENT_BYTES,
        tile_c_bytes: tr * tc * ELEMENT_BYTES,
        block: 0,
        a_ready: false,
        panels_ready: vec![false; nt as usize],
        strip: 0,
        row: 0,
        array_busy: false,
        c_slots: 2,
        done: false,
        out: GemmTiming {
            block_rows: block_tiles * tr,
            ..Default::default()
        },
        end: start,
        error: None,
    };
    let mut eng: Engine<Ev> = Engine::new();
    if start > SimTime::ZERO {
        // Fast-forward the clock without dispatching anything.
        eng.run_until(start, |_, _| {});
    }
    ex.start_block(&mut eng);
    eng.run(|e, ev| ex.handle(e, ev.payload));
    if let Some(e) = ex.error {
        return Err(e);
    }
    assert!(ex.done, "GEMM executor stalled before finishing all tiles");
    assert_eq!(ex.buf.occupancy_bytes, 0, "local buffer not drained");
    ex.out.peak_buffer_bytes = ex.buf.peak_bytes;
    ex.out.total = ex.end - start;
    Ok(ex.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed-rate path: latency plus bytes at `rate` bytes/ns.
    struct Pipe {
        latency: f64,
        rate: f64,
    }

    impl DmaPath for Pipe {
        fn transfer_ns(&mut self, _: SimTime, _: Direction, _: u64, bytes: u64) -> Result<f64> {
            Ok(self.latency + bytes as f64 / self.rate)
        }
    }

    fn run(op: GemmOp, cfg: &SystolicConfig, pipe: &mut Pipe) -> GemmTiming {
        run_gemm(&op, cfg, &GemmLayout::packed(&op, 0), pipe, SimTime::ZERO).unwrap()
    }

    #[test]
    fn systolic_matches_functional() {
        let cfg = SystolicConfig { rows: 4, cols: 3, ..Default::default() };
        let a = Matrix::new(5, 7, (0..35).map(|x| x * 3 - 40).collect()).unwrap();
        let b = Matrix::new(7, 6, (0..42).map(|x| 17 - x).collect()).unwrap();
        let (c, cycles) = gemm_systolic(&a, &b, &cfg).unwrap();
        assert_eq!(c, gemm_functional(&a, &b).unwrap());
        // 2x2 tiles, each k + rows + cols - 2 cycles.
        assert_eq!(cycles, 4 * (7 + 4 + 3 - 2));
    }

    #[test]
    fn two_by_two_product() {
        let a = Matrix::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let b = Matrix::new(2, 2, vec![5, 6, 7, 8]).unwrap();
        assert_eq!(gemm_functional(&a, &b).unwrap().data, vec![19, 22, 43, 50]);
    }

    #[test]
    fn identity_is_neutral() {
        let b = Matrix::new(3, 2, vec![1, -2, 3, 4, i32::MAX, 6]).unwrap();
        assert_eq!(gemm_functional(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn mismatched_inner_dimension_errors() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(gemm_functional(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn arithmetic_wraps() {
        let a = Matrix::new(1, 2, vec![i32::MAX, 1]).unwrap();
        let b = Matrix::new(2, 1, vec![2, 3]).unwrap();
        let expect = i32::MAX.wrapping_mul(2).wrapping_add(3);
        assert_eq!(gemm_functional(&a, &b).unwrap().data, vec![expect]);
    }

    #[test]
    fn compute_time_formula() {
        let cfg = SystolicConfig::default();
        assert_eq!(gemm_compute_time(&GemmOp::square(16).unwrap(), &cfg), SimTime(48));
        assert_eq!(gemm_compute_time(&GemmOp::square(1024).unwrap(), &cfg), SimTime(4_325_376));
        let double = SystolicConfig {
            compute_scale: 2.0,
            ..cfg
        };
        assert_eq!(gemm_compute_time(&GemmOp::square(1024).unwrap(), &double), SimTime(8_650_752));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(GemmOp::new(0, 4, 4).is_err());
    }

    #[test]
    fn executor_fetches_every_operand_at_least_once() {
        let op = GemmOp::new(100, 70, 33).unwrap();
        let t = run(op, &SystolicConfig::default(), &mut Pipe { latency: 50.0, rate: 2.0 });
        assert!(t.bytes_a >= op.a_bytes());
        assert!(t.bytes_b >= op.b_bytes());
        assert_eq!(t.bytes_c, op.c_bytes());
        assert!(t.peak_buffer_bytes <= SystolicConfig::default().buffer_bytes);
    }

    #[test]
    fn b_panels_refetched_per_block() {
        let op = GemmOp::square(512).unwrap();
        let cfg = SystolicConfig {
            block_rows: 128,
            ..SystolicConfig::default()
        };
        let t = run(op, &cfg, &mut Pipe { latency: 0.0, rate: 8.0 });
        assert_eq!(t.bytes_a, op.a_bytes());
        assert_eq!(t.bytes_b, 4 * op.b_bytes());
    }

    #[test]
    fn sandwich_bound_holds() {
        let op = GemmOp::square(256).unwrap();
        for scale in [0.01, 0.3, 1.0, 4.0, 50.0] {
            let cfg = SystolicConfig {
                compute_scale: scale,
                ..SystolicConfig::default()
            };
            let t = run(op, &cfg, &mut Pipe { latency: 400.0, rate: 2.0 });
            let lo = t.compute_ns.max(t.transfer_ns);
            assert!(t.total.0 >= lo && t.total.0 <= t.compute_ns + t.transfer_ns, "scale {scale}");
        }
    }

    #[test]
    fn compute_bound_limit() {
        let op = GemmOp::square(128).unwrap();
        let cfg = SystolicConfig {
            compute_scale: 1000.0,
            ..SystolicConfig::default()
        };
        let t = run(op, &cfg, &mut Pipe { latency: 10.0, rate: 8.0 });
        let c = gemm_compute_time(&op, &cfg).0 as f64;
        assert!((t.total.0 as f64 - c) / c < 0.01);
    }

    #[test]
    fn buffer_too_small_is_config_error() {
        let op = GemmOp::square(1024).unwrap();
        let cfg = SystolicConfig {
            buffer_bytes: 64 << 10,
            ..SystolicConfig::default()
        };
        let r = run_gemm(&op, &cfg, &GemmLayout::packed(&op, 0), &mut Pipe { latency: 0.0, rate: 1.0 }, SimTime::ZERO);
        assert!(matches!(r, Err(Error::Config { .. })));
    }
}
