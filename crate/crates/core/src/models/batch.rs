/// Coordinates in which a model's drivers are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverSpace {
    Uniform,
    Gaussian,
}

/// N joint draws of a loss model: drivers, optional copula mixing values and
/// the resulting losses, row-major.
///
/// For copula models the stored driver row holds the d uniforms U₁..U_d and
/// the mixing value 𝒱 = ℋ(U_k) is kept in [`DrawBatch::mixing`]; together
/// they determine the row's losses.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawBatch {
    pub(crate) model_tag: String,
    pub(crate) space: DriverSpace,
    pub(crate) n: usize,
    pub(crate) dim: usize,
    pub(crate) driver_width: usize,
    pub(crate) drivers: Vec<f64>,
    pub(crate) mixing: Option<Vec<f64>>,
    pub(crate) losses: Vec<f64>,
    pub(crate) totals: Vec<f64>,
}

impl DrawBatch {
    /// Assembles a batch from raw row-major buffers.
    pub fn from_parts(
        model_tag: impl Into<String>,
        space: DriverSpace,
        dim: usize,
        driver_width: usize,
        drivers: Vec<f64>,
        mixing: Option<Vec<f64>>,
        losses: Vec<f64>,
    ) -> Self {
        assert!(dim > 0 && driver_width > 0);
        let n = losses.len() / dim;
        assert_eq!(losses.len(), n * dim, "losses buffer is not n × d");
        assert_eq!(
            drivers.len(),
            n * driver_width,
            "drivers buffer is not n × width"
        );
        if let Some(m) = &mixing {
            assert_eq!(m.len(), n);
        }
        let totals = losses.chunks_exact(dim).map(|r| r.iter().sum()).collect();
        Self {
            model_tag: model_tag.into(),
            space,
            n,
            dim,
            driver_width,
            drivers,
            mixing,
            losses,
            totals,
        }
    }

    /// Batch holding only losses; drivers are zero-width placeholders. Useful
    /// for estimators that never look at drivers (δ-band, tail mean).
    pub fn from_losses(model_tag: impl Into<String>, rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        let losses: Vec<f64> = rows.iter().flatten().copied().collect();
        let n = rows.len();
        Self::from_parts(
            model_tag,
            DriverSpace::Uniform,
            dim,
            1,
            vec![0.0; n],
            None,
            losses,
        )
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn space(&self) -> DriverSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drivers(&self, row: usize) -> &[f64] {
        &self.drivers[row * self.driver_width..(row + 1) * self.driver_width]
    }

    pub fn mixing(&self, row: usize) -> Option<f64> {
        self.mixing.as_ref().map(|m| m[row])
    }

    pub fn losses(&self, row: usize) -> &[f64] {
        &self.losses[row * self.dim..(row + 1) * self.dim]
    }

    pub fn loss(&self, row: usize, asset: usize) -> f64 {
        self.losses[row * self.dim + asset]
    }

    /// Portfolio loss X = Σⱼ Xⱼ of a row.
    pub fn total(&self, row: usize) -> f64 {
        self.totals[row]
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    /// FNV-1a over the bit patterns of drivers, mixing values and losses.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        self.drivers.iter().for_each(|&v| feed(v));
        if let Some(m) = &self.mixing {
            m.iter().for_each(|&v| feed(v));
        }
        self.losses.iter().for_each(|&v| feed(v));
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_accessors() {
        let b = DrawBatch::from_losses("t", &[vec![1.0, 2.0], vec![2.0, 1.0], vec![0.5, 0.25]]);
        assert_eq!(b.len(), 3);
        assert_eq!(b.dim(), 2);
        assert_eq!(b.totals(), &[3.0, 3.0, 0.75]);
        assert_eq!(b.loss(2, 1), 0.25);
        assert_eq!(b.mixing(0), None);
    }

    #[test]
    fn checksum_sees_every_entry() {
        let a = DrawBatch::from_losses("t", &[vec![1.0, 2.0]]);
        let b = DrawBatch::from_losses("t", &[vec![1.0, 2.0000000000000004]]);
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum(), a.clone().checksum());
    }
}
