use crate::scene_io::Chip;
use crate::{Error, Result};

/// N-dimensional row-major `f32` array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Validation(format!(
                "tensor shape {shape:?} must be non-empty and positive"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Validation(format!(
                "tensor shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    /// Stacks chips into an `N × size × size × bands` batch.
    pub fn from_chips<'a>(chips: impl IntoIterator<Item = &'a Chip>) -> Result<Self> {
        let mut shape: Option<[usize; 3]> = None;
        let mut data = Vec::new();
        let mut n = 0;
        for chip in chips {
            let s = [chip.size, chip.size, chip.n_bands];
            match shape {
                None => shape = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Validation(format!(
                        "chip shape {s:?} differs from {prev:?}"
                    )))
                }
                _ => {}
            }
            data.extend_from_slice(&chip.data);
            n += 1;
        }
        let [h, w, c] = shape.ok_or_else(|| Error::Validation("no chips to batch".into()))?;
        Self::new(vec![n, h, w, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` of a tensor viewed as `shape[0] × rest`.
    pub fn item(&self, i: usize) -> &[f32] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }
}
