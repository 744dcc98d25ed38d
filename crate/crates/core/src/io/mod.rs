//! On-disk formats: `.tns` float tensors, binary PPM images and PGM masks.

mod pnm;
mod tensor;

pub use pnm::{quantize, read_image_ppm, read_mask_pgm, write_image_ppm, write_mask_pgm};
pub use tensor::{decode_tensor, encode_tensor, read_tensor, write_tensor, TENSOR_MAGIC};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir_all(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
