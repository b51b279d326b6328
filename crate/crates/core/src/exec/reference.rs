use crate::exec::{accumulate_row, check_shapes, WeightTensor};
use crate::kmap::KernelMapWS;
use crate::real::{Dense, Real};
use crate::Result;

/// Direct evaluation of the sparse convolution sum, offset-major then pair
/// order. The oracle every dataflow is checked against.
pub fn conv_ref<T: Real>(x: &Dense<T>, w: &WeightTensor<T>, map: &KernelMapWS) -> Result<Dense<T>> {
    check_shapes(x, w, map.n_in(), map.volume())?;
    let c_out = w.c_out();
    let mut y = Dense::zeros(map.n_out(), c_out);
    for k in 0..map.volume() {
        let w_k = w.offset(k);
        for p in map.pairs(k) {
            accumulate_row(y.row_mut(p.output as usize), x.row(p.input as usize), w_k, c_out);
        }
    }
    Ok(y)
}
