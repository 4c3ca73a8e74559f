use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

/// Dense input/output vector tables, row-major `f32`.
///
/// Input rows `0..N` are token vectors; FastText models append one row per
/// n-gram bucket after them. Output rows hold the context-side vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub input: Vec<f32>,
    pub output: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn zeros(input_rows: usize, output_rows: usize, dim: usize) -> Self {
        Self { dim, input: vec![0.0; input_rows * dim], output: vec![0.0; output_rows * dim] }
    }

    /// Input uniform in `[-0.5/dim, 0.5/dim]`, output zero.
    pub fn init<R: Rng>(input_rows: usize, output_rows: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 0.5 / dim as f32;
        let input = (0..input_rows * dim).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { dim, input, output: vec![0.0; output_rows * dim] }
    }

    pub fn input_rows(&self) -> usize {
        if self.dim == 0 { 0 } else { self.input.len() / self.dim }
    }

    pub fn output_rows(&self) -> usize {
        if self.dim == 0 { 0 } else { self.output.len() / self.dim }
    }

    pub fn input_row(&self, r: usize) -> &[f32] {
        &self.input[r * self.dim..(r + 1) * self.dim]
    }

    pub fn output_row(&self, r: usize) -> &[f32] {
        &self.output[r * self.dim..(r + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.input[r * self.dim..(r + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.output[r * self.dim..(r + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|v| v.is_finite())
    }
}

/// Row access used by the update kernels, so the same code runs on an
/// exclusively owned matrix and on the lock-free shared view.
pub trait RowStore {
    fn dim(&self) -> usize;
    fn read_input(&self, row: usize, out: &mut [f64]);
    fn read_output(&self, row: usize, out: &mut [f64]);
    fn add_input(&mut self, row: usize, delta: &[f64], scale: f64);
    fn add_output(&mut self, row: usize, delta: &[f64], scale: f64);
}

impl RowStore for EmbeddingMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn read_input(&self, row: usize, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(self.input_row(row)) {
            *o = v as f64;
        }
    }

    fn read_output(&self, row: usize, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(self.output_row(row)) {
            *o = v as f64;
        }
    }

    fn add_input(&mut self, row: usize, delta: &[f64], scale: f64) {
        for (v, d) in self.input_row_mut(row).iter_mut().zip(delta) {
            *v = (*v as f64 + scale * d) as f32;
        }
    }

    fn add_output(&mut self, row: usize, delta: &[f64], scale: f64) {
        for (v, d) in self.output_row_mut(row).iter_mut().zip(delta) {
            *v = (*v as f64 + scale * d) as f32;
        }
    }
}

/// Matrix stored as relaxed atomics. Workers read and write rows without
/// mutual exclusion; concurrent updates to the same row may be lost.
pub struct SharedMatrix {
    dim: usize,
    input: Vec<AtomicU32>,
    output: Vec<AtomicU32>,
}

impl SharedMatrix {
    pub fn from_matrix(m: &EmbeddingMatrix) -> Self {
        let conv = |v: &[f32]| v.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        Self { dim: m.dim, input: conv(&m.input), output: conv(&m.output) }
    }

    pub fn into_matrix(self) -> EmbeddingMatrix {
        let conv = |v: Vec<AtomicU32>| v.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
        EmbeddingMatrix { dim: self.dim, input: conv(self.input), output: conv(self.output) }
    }

    pub fn view(&self) -> SharedView<'_> {
        SharedView { m: self }
    }
}

#[derive(Clone, Copy)]
pub struct SharedView<'a> {
    m: &'a SharedMatrix,
}

fn read_atomic(src: &[AtomicU32], out: &mut [f64]) {
    for (o, a) in out.iter_mut().zip(src) {
        *o = f32::from_bits(a.load(Ordering::Relaxed)) as f64;
    }
}

fn add_atomic(dst: &[AtomicU32], delta: &[f64], scale: f64) {
    for (a, d) in dst.iter().zip(delta) {
        let cur = f32::from_bits(a.load(Ordering::Relaxed)) as f64;
        a.store(((cur + scale * d) as f32).to_bits(), Ordering::Relaxed);
    }
}

impl RowStore for SharedView<'_> {
    fn dim(&self) -> usize {
        self.m.dim
    }

    fn read_input(&self, row: usize, out: &mut [f64]) {
        let d = self.m.dim;
        read_atomic(&self.m.input[row * d..(row + 1) * d], out);
    }

    fn read_output(&self, row: usize, out: &mut [f64]) {
        let d = self.m.dim;
        read_atomic(&self.m.output[row * d..(row + 1) * d], out);
    }

    fn add_input(&mut self, row: usize, delta: &[f64], scale: f64) {
        let d = self.m.dim;
        add_atomic(&self.m.input[row * d..(row + 1) * d], delta, scale);
    }

    fn add_output(&mut self, row: usize, delta: &[f64], scale: f64) {
        let d = self.m.dim;
        add_atomic(&self.m.output[row * d..(row + 1) * d], delta, scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = EmbeddingMatrix::init(10, 10, 4, &mut rng);
        assert!(m.input.iter().all(|v| v.abs() <= 0.125));
        assert!(m.output.iter().all(|&v| v == 0.0));
        assert_eq!(m.input_rows(), 10);
    }

    #[test]
    fn shared_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let m = EmbeddingMatrix::init(3, 2, 5, &mut rng);
        let s = SharedMatrix::from_matrix(&m);
        let mut v = s.view();
        v.add_output(1, &[1.0; 5], 0.5);
        let back = s.into_matrix();
        assert_eq!(back.input, m.input);
        assert_eq!(back.output_row(1), &[0.5; 5]);
    }
}
