//! Weighted least-squares quadratic fit per pixel.
//!
//! Because the basis `{1, x, y, x², y², xy}` and the Gaussian applicability
//! are the same at every pixel, the fit reduces to six separable correlations
//! followed by a fixed 6×6 linear map (the inverse Gram matrix). With a
//! symmetric applicability all odd moments of the Gram matrix vanish, so the
//! map decouples into a 3×3 block for `{1, x², y²}` and three scalars.

use super::{validate_expansion, FlowError};
use crate::image::GrayImage;

/// Per-pixel quadratic model `f(x) ≈ xᵀAx + bᵀx + c` in local coordinates
/// (`x` rightward, `y` downward, origin at the pixel centre).
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpansion {
    width: usize,
    height: usize,
    /// Interleaved per pixel: `[axx, axy, ayy, bx, by, c]`.
    pub(crate) coeffs: Vec<[f32; 6]>,
}

impl PolyExpansion {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Symmetric matrix `A` at `(x, y)`.
    pub fn a(&self, x: usize, y: usize) -> [[f32; 2]; 2] {
        let k = &self.coeffs[y * self.width + x];
        [[k[0], k[1]], [k[1], k[2]]]
    }

    pub fn b(&self, x: usize, y: usize) -> [f32; 2] {
        let k = &self.coeffs[y * self.width + x];
        [k[3], k[4]]
    }

    pub fn c(&self, x: usize, y: usize) -> f32 {
        self.coeffs[y * self.width + x][5]
    }
}

/// Fixed linear map from the six weighted moments to the coefficients.
struct Projection {
    taps: Vec<f64>,
    radius: isize,
    /// Inverse Gram block acting on the `(1, x², y²)` moments.
    even: [[f64; 3]; 3],
    inv_xx: f64,
    inv_yy: f64,
    inv_xy: f64,
}

impl Projection {
    fn new(poly_n: usize, sigma: f64) -> Self {
        let radius = (poly_n / 2) as isize;
        let taps: Vec<f64> = (-radius..=radius)
            .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        // 1-D moments of the applicability: s_p = Σ g(k) kᵖ
        let moment = |p: i32| -> f64 {
            (-radius..=radius)
                .zip(&taps)
                .map(|(k, g)| g * (k as f64).powi(p))
                .sum()
        };
        let (s0, s2, s4) = (moment(0), moment(2), moment(4));
        // Gram entries for the separable weight g(x)g(y).
        let g_11 = s0 * s0;
        let g_1xx = s2 * s0;
        let g_xxxx = s4 * s0;
        let g_xxyy = s2 * s2;
        let gram = [
            [g_11, g_1xx, g_1xx],
            [g_1xx, g_xxxx, g_xxyy],
            [g_1xx, g_xxyy, g_xxxx],
        ];
        Self {
            taps,
            radius,
            even: invert3(gram),
            inv_xx: 1.0 / (s2 * s0),
            inv_yy: 1.0 / (s2 * s0),
            inv_xy: 1.0 / (s2 * s2),
        }
    }
}

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            // adjugate: cofactor of (c, r)
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *out = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    inv
}

/// Fits a Gaussian-weighted quadratic to every `poly_n × poly_n`
/// neighbourhood, replicating the border.
pub fn polynomial_expansion(
    img: &GrayImage,
    poly_n: usize,
    poly_sigma: f64,
) -> Result<PolyExpansion, FlowError> {
    validate_expansion(poly_n, poly_sigma)?;
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return Err(FlowError::EmptyFrame);
    }
    let proj = Projection::new(poly_n, poly_sigma);
    let r = proj.radius;
    let taps = &proj.taps;

    // Horizontal pass: per-pixel moments Σg·f, Σg·k·f, Σg·k²·f, tap by tap so
    // the inner loops run over contiguous rows.
    let n = w * h;
    let mut h0 = vec![0.0f64; n];
    let mut h1 = vec![0.0f64; n];
    let mut h2 = vec![0.0f64; n];
    let mut padded = vec![0.0f64; w + 2 * r as usize];
    for y in 0..h {
        let row = img.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            let sx = (i as isize - r).clamp(0, w as isize - 1) as usize;
            *p = row[sx] as f64;
        }
        let span = y * w..(y + 1) * w;
        let (o0, o1, o2) = (&mut h0[span.clone()], &mut h1[span.clone()], &mut h2[span]);
        for (j, (k, g)) in (-r..=r).zip(taps).enumerate() {
            let (g1, g2) = (g * k as f64, g * (k * k) as f64);
            let src = &padded[j..j + w];
            for x in 0..w {
                let f = src[x];
                o0[x] += g * f;
                o1[x] += g1 * f;
                o2[x] += g2 * f;
            }
        }
    }

    let inv = &proj.even;
    let mut coeffs = Vec::with_capacity(n);
    let mut m = [(); 6].map(|_| vec![0.0f64; w]);
    for y in 0..h {
        for acc in &mut m {
            acc.fill(0.0);
        }
        for (l, g) in (-r..=r).zip(taps) {
            let ri = (y as isize + l).clamp(0, h as isize - 1) as usize * w;
            let (gl, gll) = (g * l as f64, g * (l * l) as f64);
            let (s0, s1, s2) = (&h0[ri..ri + w], &h1[ri..ri + w], &h2[ri..ri + w]);
            let [m1, mx, my, mxx, myy, mxy] = &mut m;
            for x in 0..w {
                m1[x] += g * s0[x];
                mx[x] += g * s1[x];
                my[x] += gl * s0[x];
                mxx[x] += g * s2[x];
                myy[x] += gll * s0[x];
                mxy[x] += gl * s1[x];
            }
        }
        let [m1, mx, my, mxx, myy, mxy] = &m;
        for x in 0..w {
            let (m1, mxx, myy) = (m1[x], mxx[x], myy[x]);
            coeffs.push([
                (inv[1][0] * m1 + inv[1][1] * mxx + inv[1][2] * myy) as f32,
                // the xy basis coefficient is 2·A₀₁
                (0.5 * mxy[x] * proj.inv_xy) as f32,
                (inv[2][0] * m1 + inv[2][1] * mxx + inv[2][2] * myy) as f32,
                (mx[x] * proj.inv_xx) as f32,
                (my[x] * proj.inv_yy) as f32,
                (inv[0][0] * m1 + inv[0][1] * mxx + inv[0][2] * myy) as f32,
            ]);
        }
    }
    Ok(PolyExpansion {
        width: w,
        height: h,
        coeffs,
    })
}
