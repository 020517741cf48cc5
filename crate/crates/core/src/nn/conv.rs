//! 2-D cross-correlation with zero padding.
//!
//! Activations are `[C, H, W]` or `[N, C, H, W]`; kernels are
//! `[out, in, k, k]` and biases `[out]`.

use super::{NnError, Tensor};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Geometry {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvLayer {
    pub fn new(kernel: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self, NnError> {
        let ks = kernel.shape();
        if ks.len() != 4 || ks[2] != ks[3] || ks[2] == 0 {
            return Err(NnError::Shape(format!("kernel must be [out, in, k, k] with k >= 1, found {ks:?}")));
        }
        bias.expect_shape(&[ks[0]])?;
        if stride == 0 {
            return Err(NnError::Invalid("stride must be >= 1".into()));
        }
        Ok(ConvLayer { kernel, bias, stride, padding })
    }

    /// Kaiming-uniform (fan-in, ReLU gain) kernel and zero bias.
    pub fn kaiming<R: Rng>(
        rng: &mut R,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self, NnError> {
        let fan_in = (in_ch * k * k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let values = (0..out_ch * in_ch * k * k).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::new(Tensor::new(vec![out_ch, in_ch, k, k], values)?, Tensor::zeros(vec![out_ch]), stride, padding)
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn num_params(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        let k = self.kernel_size();
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < k || wp < k {
            return Err(NnError::Shape(format!("input {h}x{w} is smaller than kernel {k}")));
        }
        Ok(((hp - k) / self.stride + 1, (wp - k) / self.stride + 1))
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry, NnError> {
        let (batch, c, h, w) = match *x.shape() {
            [c, h, w] => (1, c, h, w),
            [n, c, h, w] => (n, c, h, w),
            ref s => return Err(NnError::Shape(format!("conv input must be 3-D or 4-D, found {s:?}"))),
        };
        if c != self.in_channels() {
            return Err(NnError::Shape(format!("conv expects {} input channels, found {c}", self.in_channels())));
        }
        let (oh, ow) = self.output_hw(h, w)?;
        Ok(Geometry {
            batch,
            in_ch: c,
            out_ch: self.out_channels(),
            k: self.kernel_size(),
            h,
            w,
            oh,
            ow,
            stride: self.stride,
            pad: self.padding,
        })
    }

    fn output_shape(x: &Tensor, g: &Geometry) -> Vec<usize> {
        if x.shape().len() == 3 {
            vec![g.out_ch, g.oh, g.ow]
        } else {
            vec![g.batch, g.out_ch, g.oh, g.ow]
        }
    }
}

/// Output positions `o` along one axis for which `o * stride + tap - pad` lands
/// inside `[0, size)`.
#[inline]
fn valid_range(tap: usize, pad: usize, stride: usize, size: usize, out: usize) -> (usize, usize) {
    let lo = if tap >= pad { 0 } else { (pad - tap).div_ceil(stride) };
    // largest o with o * stride + tap - pad <= size - 1
    let hi = if size + pad > tap { ((size + pad - 1 - tap) / stride + 1).min(out) } else { 0 };
    (lo.min(hi), hi)
}

pub fn conv2d_forward(x: &Tensor, layer: &ConvLayer) -> Result<Tensor, NnError> {
    let g = layer.geometry(x)?;
    let xv = x.values();
    let kv = layer.kernel.values();
    let bv = layer.bias.values();
    let mut out = vec![0.0; g.batch * g.out_ch * g.oh * g.ow];
    let (in_plane, out_plane) = (g.h * g.w, g.oh * g.ow);
    for n in 0..g.batch {
        for o in 0..g.out_ch {
            let ob = (n * g.out_ch + o) * out_plane;
            out[ob..ob + out_plane].fill(bv[o]);
            for i in 0..g.in_ch {
                let ib = (n * g.in_ch + i) * in_plane;
                for ky in 0..g.k {
                    let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h, g.oh);
                    for kx in 0..g.k {
                        let wgt = kv[((o * g.in_ch + i) * g.k + ky) * g.k + kx];
                        let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w, g.ow);
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let orow = &mut out[ob + oy * g.ow..ob + (oy + 1) * g.ow];
                            let irow = &xv[ib + iy * g.w..ib + (iy + 1) * g.w];
                            for ox in ox0..ox1 {
                                orow[ox] += wgt * irow[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(ConvLayer::output_shape(x, &g), out)
}

/// Gradients with respect to the input, kernel and bias given `dL/d output`.
pub fn conv2d_backward(x: &Tensor, layer: &ConvLayer, grad_out: &Tensor) -> Result<ConvGrads, NnError> {
    let g = layer.geometry(x)?;
    grad_out.expect_shape(&ConvLayer::output_shape(x, &g))?;
    let xv = x.values();
    let kv = layer.kernel.values();
    let gv = grad_out.values();
    let mut gin = vec![0.0; xv.len()];
    let mut gk = vec![0.0; kv.len()];
    let mut gb = vec![0.0; g.out_ch];
    let (in_plane, out_plane) = (g.h * g.w, g.oh * g.ow);
    for n in 0..g.batch {
        for o in 0..g.out_ch {
            let ob = (n * g.out_ch + o) * out_plane;
            gb[o] += gv[ob..ob + out_plane].iter().sum::<f64>();
            for i in 0..g.in_ch {
                let ib = (n * g.in_ch + i) * in_plane;
                for ky in 0..g.k {
                    let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h, g.oh);
                    for kx in 0..g.k {
                        let widx = ((o * g.in_ch + i) * g.k + ky) * g.k + kx;
                        let wgt = kv[widx];
                        let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w, g.ow);
                        let mut acc = 0.0;
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let grow = &gv[ob + oy * g.ow..ob + (oy + 1) * g.ow];
                            let irow = ib + iy * g.w;
                            for ox in ox0..ox1 {
                                let ix = irow + ox * g.stride + kx - g.pad;
                                acc += xv[ix] * grow[ox];
                                gin[ix] += wgt * grow[ox];
                            }
                        }
                        gk[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads { input: Tensor::new(x.shape().to_vec(), gin)?, kernel: gk, bias: gb })
}
