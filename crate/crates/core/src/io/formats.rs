//! Little-endian binary frame files. Every file starts with a 16-byte header:
//! 4-byte magic, 1-byte version, then type-specific fields.

use crate::grid::{BevGrid, GridSpec, MaskProvenance, SemanticMask};
use crate::model::{BevClass, CoordFrame, PointCloud, SensorKind};
use crate::eval::SegPrediction;

use super::IoError;

pub const HEADER_LEN: usize = 16;
pub const FORMAT_VERSION: u8 = 1;
pub const BEV_MAGIC: &[u8; 4] = b"BEVG";
pub const CLOUD_MAGIC: &[u8; 4] = b"BEVP";
pub const MASK_MAGIC: &[u8; 4] = b"BEVM";
pub const SEG_MAGIC: &[u8; 4] = b"BEVS";
/// Bytes per point record: x, y, z, intensity as f32.
pub const POINT_RECORD_LEN: usize = 16;

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn check_header(what: &'static str, bytes: &[u8], magic: &[u8; 4]) -> Result<(), IoError> {
    if bytes.len() < HEADER_LEN {
        return Err(IoError::Truncated {
            what,
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[0..4] != magic {
        return Err(IoError::BadMagic {
            what,
            found: bytes[0..4].try_into().unwrap(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(IoError::BadVersion { what, found: bytes[4] });
    }
    Ok(())
}

fn check_len(what: &'static str, bytes: &[u8], expected: usize) -> Result<(), IoError> {
    if bytes.len() != expected {
        return Err(IoError::Truncated {
            what,
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

fn spec_fields(spec: &GridSpec) -> Result<(u32, u32), IoError> {
    let mm = spec.cell_size_mm().ok_or(IoError::CellSizeNotMillimetres(spec.cell_size_m))?;
    Ok((spec.cells, mm))
}

fn spec_from(what: &'static str, l: u32, mm: u32) -> Result<GridSpec, IoError> {
    GridSpec::new(l, mm as f64 / 1000.0).map_err(|e| IoError::Corrupt {
        what,
        reason: e.to_string(),
    })
}

/// `BEVG | ver | C | reserved u16 | l u32 | d_mm u32`, then the channel-major
/// bit-packed payload.
pub fn encode_bev_gt(grid: &BevGrid) -> Result<Vec<u8>, IoError> {
    let (l, mm) = spec_fields(&grid.spec)?;
    let mut out = Vec::with_capacity(HEADER_LEN + grid.payload_len());
    out.extend_from_slice(BEV_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(BevClass::COUNT as u8);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&l.to_le_bytes());
    out.extend_from_slice(&mm.to_le_bytes());
    out.extend_from_slice(&grid.packed_payload());
    Ok(out)
}

pub fn decode_bev_gt(bytes: &[u8]) -> Result<BevGrid, IoError> {
    const WHAT: &str = "bev_gt.bin";
    check_header(WHAT, bytes, BEV_MAGIC)?;
    if bytes[5] as usize != BevClass::COUNT {
        return Err(IoError::Corrupt {
            what: WHAT,
            reason: format!("{} channels, expected {}", bytes[5], BevClass::COUNT),
        });
    }
    let spec = spec_from(WHAT, u32_at(bytes, 8), u32_at(bytes, 12))?;
    check_len(WHAT, bytes, HEADER_LEN + BevGrid::payload_len_for(&spec))?;
    Ok(BevGrid::from_packed_payload(spec, &bytes[HEADER_LEN..]))
}

/// `BEVP | ver | sensor | frame | reserved | count u64`, then f32 records.
pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + cloud.len() * POINT_RECORD_LEN);
    out.extend_from_slice(CLOUD_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(match cloud.sensor {
        SensorKind::Lidar => 0,
        SensorKind::Radar => 1,
    });
    out.push(match cloud.frame {
        CoordFrame::Ego => 0,
        CoordFrame::World => 1,
    });
    out.push(0);
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for p in &cloud.points {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8]) -> Result<PointCloud, IoError> {
    const WHAT: &str = "point cloud";
    check_header(WHAT, bytes, CLOUD_MAGIC)?;
    let corrupt = |reason: &str| IoError::Corrupt {
        what: WHAT,
        reason: reason.to_string(),
    };
    let sensor = match bytes[5] {
        0 => SensorKind::Lidar,
        1 => SensorKind::Radar,
        _ => return Err(corrupt("unknown sensor code")),
    };
    let frame = match bytes[6] {
        0 => CoordFrame::Ego,
        1 => CoordFrame::World,
        _ => return Err(corrupt("unknown frame code")),
    };
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = usize::try_from(count)
        .ok()
        .and_then(|n| n.checked_mul(POINT_RECORD_LEN))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| corrupt("point count overflows"))?;
    check_len(WHAT, bytes, expected)?;
    let mut cloud = PointCloud::new(sensor, frame);
    cloud.points = bytes[HEADER_LEN..]
        .chunks_exact(POINT_RECORD_LEN)
        .map(|r| std::array::from_fn(|k| f32::from_le_bytes(r[4 * k..4 * k + 4].try_into().unwrap())))
        .collect();
    Ok(cloud)
}

/// `BEVM | ver | n | provenance x2 | l u32 | d_mm u32`, then `n * l * l`
/// label bytes (one class bitmask per pixel, row-major).
pub fn encode_masks(spec: &GridSpec, masks: [&SemanticMask; 2]) -> Result<Vec<u8>, IoError> {
    let (l, mm) = spec_fields(spec)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * spec.side() * spec.side());
    out.extend_from_slice(MASK_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(2);
    out.push(masks[0].provenance.code());
    out.push(masks[1].provenance.code());
    out.extend_from_slice(&l.to_le_bytes());
    out.extend_from_slice(&mm.to_le_bytes());
    for m in masks {
        if m.side() != spec.side() {
            return Err(IoError::Corrupt {
                what: "masks.bin",
                reason: format!("mask side {} does not match grid side {}", m.side(), spec.side()),
            });
        }
        out.extend_from_slice(m.labels());
    }
    Ok(out)
}

pub fn decode_masks(bytes: &[u8]) -> Result<(GridSpec, [SemanticMask; 2]), IoError> {
    const WHAT: &str = "masks.bin";
    check_header(WHAT, bytes, MASK_MAGIC)?;
    let corrupt = |reason: String| IoError::Corrupt { what: WHAT, reason };
    if bytes[5] != 2 {
        return Err(corrupt(format!("{} masks, expected 2", bytes[5])));
    }
    let prov = |code: u8| MaskProvenance::from_code(code).ok_or_else(|| corrupt(format!("provenance code {code}")));
    let (p0, p1) = (prov(bytes[6])?, prov(bytes[7])?);
    let spec = spec_from(WHAT, u32_at(bytes, 8), u32_at(bytes, 12))?;
    let n = spec.side() * spec.side();
    check_len(WHAT, bytes, HEADER_LEN + 2 * n)?;
    let body = &bytes[HEADER_LEN..];
    Ok((
        spec,
        [
            SemanticMask::from_labels(spec.side(), body[..n].to_vec(), p0),
            SemanticMask::from_labels(spec.side(), body[n..].to_vec(), p1),
        ],
    ))
}

/// `BEVS | ver | C | reserved u16 | l u32 | d_mm u32`, then `C * l * l` f32
/// scores, channel-major, row-major within a channel.
pub fn encode_seg_prediction(pred: &SegPrediction) -> Result<Vec<u8>, IoError> {
    let (l, mm) = spec_fields(&pred.spec)?;
    let mut out = Vec::with_capacity(HEADER_LEN + pred.scores.iter().map(|p| 4 * p.len()).sum::<usize>());
    out.extend_from_slice(SEG_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(BevClass::COUNT as u8);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&l.to_le_bytes());
    out.extend_from_slice(&mm.to_le_bytes());
    for plane in &pred.scores {
        for v in plane {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_seg_prediction(bytes: &[u8]) -> Result<SegPrediction, IoError> {
    const WHAT: &str = "segmentation prediction";
    check_header(WHAT, bytes, SEG_MAGIC)?;
    if bytes[5] as usize != BevClass::COUNT {
        return Err(IoError::Corrupt {
            what: WHAT,
            reason: format!("{} channels, expected {}", bytes[5], BevClass::COUNT),
        });
    }
    let spec = spec_from(WHAT, u32_at(bytes, 8), u32_at(bytes, 12))?;
    let n = spec.side() * spec.side();
    check_len(WHAT, bytes, HEADER_LEN + 4 * n * BevClass::COUNT)?;
    let scores = bytes[HEADER_LEN..]
        .chunks_exact(4 * n)
        .map(|plane| {
            plane
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect();
    SegPrediction::new(spec, scores).map_err(|e| IoError::Corrupt {
        what: WHAT,
        reason: e.to_string(),
    })
}
