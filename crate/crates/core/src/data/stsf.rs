//! STSF: a small binary container for spatio-temporal series.
//!
//! ```text
//! "STSF0001"                      8 bytes magic
//! header length                   u32, little-endian
//! header                          UTF-8 JSON
//! payload                         nodes·steps·channels values, f32le or f64le,
//!                                 ordered (step, node, channel)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SeriesTensor;
use crate::error::{Error, Result};

pub const STSF_MAGIC: &[u8; 8] = b"STSF0001";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32,
    #[serde(rename = "f64le")]
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StsfHeader {
    pub nodes: usize,
    pub steps: usize,
    pub channels: usize,
    pub dtype: Dtype,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_minutes: Option<f64>,
    /// Free-form provenance, e.g. the generator settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl StsfHeader {
    pub fn for_series(series: &SeriesTensor, dtype: Dtype) -> Self {
        Self {
            nodes: series.nodes(),
            steps: series.steps(),
            channels: series.channels(),
            dtype,
            layout: "time_major".into(),
            name: None,
            interval_minutes: None,
            config: None,
        }
    }

    fn payload_bytes(&self) -> Option<usize> {
        self.nodes
            .checked_mul(self.steps)?
            .checked_mul(self.channels)?
            .checked_mul(self.dtype.width())
    }
}

pub fn write_series<W: Write>(mut w: W, series: &SeriesTensor, header: &StsfHeader) -> Result<()> {
    if (header.nodes, header.steps, header.channels) != (series.nodes(), series.steps(), series.channels()) {
        return Err(Error::Format("header dimensions disagree with the series".into()));
    }
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(STSF_MAGIC)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    match header.dtype {
        Dtype::F64 => {
            for v in series.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Dtype::F32 => {
            for v in series.values() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(mut r: R) -> Result<(StsfHeader, SeriesTensor)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("STSF file shorter than the magic tag".into()))?;
    if &magic != STSF_MAGIC {
        return Err(Error::Format(format!(
            "bad STSF magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            std::str::from_utf8(STSF_MAGIC).unwrap()
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::Format("STSF header length missing".into()))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)
        .map_err(|_| Error::Format("STSF header shorter than declared".into()))?;
    let header: StsfHeader = serde_json::from_slice(&json)?;
    if header.layout != "time_major" {
        return Err(Error::Format(format!("unsupported STSF layout `{}`", header.layout)));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = header
        .payload_bytes()
        .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::PayloadSize {
            expected,
            actual: payload.len(),
        });
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let series = SeriesTensor::new(header.nodes, header.steps, header.channels, values)?;
    Ok((header, series))
}

pub fn save_series(path: impl AsRef<Path>, series: &SeriesTensor, header: &StsfHeader) -> Result<()> {
    write_series(BufWriter::new(File::create(path)?), series, header)
}

pub fn load_series(path: impl AsRef<Path>) -> Result<(StsfHeader, SeriesTensor)> {
    read_series(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(series: &SeriesTensor, dtype: Dtype) -> Vec<u8> {
        let mut buf = Vec::new();
        write_series(&mut buf, series, &StsfHeader::for_series(series, dtype)).unwrap();
        buf
    }

    #[test]
    fn layout_of_small_file() {
        let s = SeriesTensor::new(1, 2, 1, vec![1.5, -2.0]).unwrap();
        let bytes = encode(&s, Dtype::F64);
        assert_eq!(&bytes[..8], b"STSF0001");
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
        assert_eq!(header["dtype"], "f64le");
        assert_eq!(header["layout"], "time_major");
        assert_eq!(&bytes[12 + hlen..12 + hlen + 8], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 12 + hlen + 16);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let values: Vec<f64> = (0..15).map(|i| (i as f64 * 0.731).sin() * 1e3 + 1e-17).collect();
        let s = SeriesTensor::new(3, 5, 1, values).unwrap();
        let (_, back) = read_series(encode(&s, Dtype::F64).as_slice()).unwrap();
        let a: Vec<u64> = s.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let s = SeriesTensor::new(3, 5, 1, vec![1.0; 15]).unwrap();
        let mut bytes = encode(&s, Dtype::F64);
        bytes.truncate(bytes.len() - 3);
        match read_series(bytes.as_slice()) {
            Err(Error::PayloadSize { expected, actual }) => {
                assert_eq!(expected, 120);
                assert_eq!(actual, 117);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_non_finite() {
        let s = SeriesTensor::new(1, 1, 1, vec![1.0]).unwrap();
        let mut bytes = encode(&s, Dtype::F64);
        bytes[7] = b'2';
        assert!(matches!(read_series(bytes.as_slice()), Err(Error::Format(_))));

        let mut bytes = encode(&s, Dtype::F64);
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(read_series(bytes.as_slice()).is_err());
    }

    #[test]
    fn f32_payload_and_optional_keys() {
        let s = SeriesTensor::new(2, 1, 1, vec![0.25, 3.0]).unwrap();
        let mut header = StsfHeader::for_series(&s, Dtype::F32);
        header.name = Some("toy".into());
        header.interval_minutes = Some(5.0);
        let mut buf = Vec::new();
        write_series(&mut buf, &s, &header).unwrap();
        let (h, back) = read_series(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, s);
    }

    #[test]
    fn pems8_shaped_file_reports_header() {
        let (nodes, steps) = (170, 17_856);
        let values: Vec<f64> = (0..nodes * steps).map(|i| (i % 500) as f64).collect();
        let s = SeriesTensor::new(nodes, steps, 1, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pems08.stsf");
        let mut header = StsfHeader::for_series(&s, Dtype::F32);
        header.name = Some("PeMSD8".into());
        save_series(&path, &s, &header).unwrap();
        let (h, back) = load_series(&path).unwrap();
        assert_eq!((h.nodes, h.steps, h.channels), (170, 17_856, 1));
        assert_eq!(back.nodes(), 170);
        assert_eq!(back.steps(), 17_856);
    }

    proptest! {
        #[test]
        fn f64_round_trip(values in prop::collection::vec(-1e12..1e12f64, 1..64)) {
            let s = SeriesTensor::new(1, values.len(), 1, values).unwrap();
            let (_, back) = read_series(encode(&s, Dtype::F64).as_slice()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
