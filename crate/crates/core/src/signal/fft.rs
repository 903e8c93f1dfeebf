use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Forward complex DFT of a fixed size.
///
/// Powers of two use an iterative radix-2 transform; other sizes go through
/// Bluestein's chirp-z reformulation on a padded power-of-two transform.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        chirp: Vec<Complex64>,
        kernel_fft: Vec<Complex64>,
        inner: Radix2,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Radix2 {
            n,
            twiddles,
            bitrev,
        }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
        if inverse {
            let scale = 1.0 / n as f64;
            buf.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "fft size must be >= 1");
        if n.is_power_of_two() {
            return Fft {
                n,
                kind: Kind::Radix2(Radix2::new(n)),
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp[k] = exp(-i pi k^2 / n); k^2 reduced mod 2n keeps the angle exact
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.run(&mut kernel, false);
        Fft {
            n,
            kind: Kind::Bluestein {
                chirp,
                kernel_fft: kernel,
                inner,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X[k] = Σ x[t] e^{-2πi kt/n}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        match &self.kind {
            Kind::Radix2(r) => r.run(buf, false),
            Kind::Bluestein {
                chirp,
                kernel_fft,
                inner,
            } => {
                let m = inner.n;
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for k in 0..self.n {
                    a[k] = buf[k] * chirp[k];
                }
                inner.run(&mut a, false);
                for (v, w) in a.iter_mut().zip(kernel_fft) {
                    *v *= w;
                }
                inner.run(&mut a, true);
                for k in 0..self.n {
                    buf[k] = a[k] * chirp[k];
                }
            }
        }
    }

    /// Power `|X[k]|²` for `k = 0..=n/2` of a real input.
    pub fn power_spectrum(&self, x: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf[..self.n / 2 + 1]) {
            *o = v.norm_sqr();
        }
    }
}
