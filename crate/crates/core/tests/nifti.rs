//! NIfTI-1 parsing against files assembled byte by byte.

use lungnet::imagecore::{parse_nifti, select_open_lung_slices, Endianness, NiftiError, SliceBand, Voxels};

/// Writes a minimal single-file NIfTI-1 image, independent of the parser.
fn write_nifti(dims: [i16; 3], datatype: i16, payload: &[u8], slope: f32, inter: f32, big: bool) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    let put_i32 = |h: &mut Vec<u8>, at: usize, v: i32| {
        let b = if big { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 4].copy_from_slice(&b);
    };
    let put_i16 = |h: &mut Vec<u8>, at: usize, v: i16| {
        let b = if big { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 2].copy_from_slice(&b);
    };
    let put_f32 = |h: &mut Vec<u8>, at: usize, v: f32| {
        let b = if big { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 4].copy_from_slice(&b);
    };
    put_i32(&mut h, 0, 348);
    put_i16(&mut h, 40, 3);
    for (k, d) in dims.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * k, *d);
    }
    for k in 3..7 {
        put_i16(&mut h, 42 + 2 * k, 1);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, if datatype == 4 { 16 } else { 32 });
    put_f32(&mut h, 108, 352.0);
    put_f32(&mut h, 112, slope);
    put_f32(&mut h, 116, inter);
    h[344..348].copy_from_slice(b"n+1\0");
    h.extend_from_slice(payload);
    h
}

fn int16_fixture(big: bool) -> (Vec<i16>, Vec<u8>) {
    let values: Vec<i16> = (0..32).map(|i| (i as i16 - 16) * 97).collect();
    let payload: Vec<u8> = values
        .iter()
        .flat_map(|v| if big { v.to_be_bytes() } else { v.to_le_bytes() })
        .collect();
    (values.clone(), write_nifti([4, 4, 2], 4, &payload, 1.0, -1024.0, big))
}

#[test]
fn int16_round_trip_both_endiannesses() {
    for big in [false, true] {
        let (values, bytes) = int16_fixture(big);
        let vol = parse_nifti(&bytes).unwrap();
        assert_eq!(vol.dims, (4, 4, 2));
        assert_eq!(vol.endianness, if big { Endianness::Big } else { Endianness::Little });
        assert_eq!(vol.voxels, Voxels::I16(values.clone()));
        for (i, v) in values.iter().enumerate() {
            assert_eq!(vol.hu(i), *v as f64 - 1024.0);
        }
    }
}

#[test]
fn float32_with_scaling() {
    let values: Vec<f32> = (0..18).map(|i| i as f32 * 0.5 - 3.0).collect();
    let payload: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let vol = parse_nifti(&write_nifti([3, 2, 3], 16, &payload, 2.0, 10.0, false)).unwrap();
    assert_eq!(vol.dims, (3, 2, 3));
    for (i, v) in values.iter().enumerate() {
        assert_eq!(vol.hu(i), *v as f64 * 2.0 + 10.0);
    }
}

#[test]
fn zero_slope_means_identity() {
    let payload: Vec<u8> = [5i16, -7].iter().flat_map(|v| v.to_le_bytes()).collect();
    let vol = parse_nifti(&write_nifti([2, 1, 1], 4, &payload, 0.0, 0.0, false)).unwrap();
    assert_eq!(vol.hu(0), 5.0);
    assert_eq!(vol.hu(1), -7.0);
}

#[test]
fn malformed_magic() {
    let (_, mut bytes) = int16_fixture(false);
    bytes[344..348].copy_from_slice(b"XXXX");
    assert_eq!(parse_nifti(&bytes).unwrap_err(), NiftiError::BadMagic(*b"XXXX"));
}

#[test]
fn truncated_payload_and_header() {
    let (_, bytes) = int16_fixture(true);
    let cut = &bytes[..bytes.len() - 1];
    assert_eq!(
        parse_nifti(cut).unwrap_err(),
        NiftiError::Truncated {
            needed: 352 + 64,
            available: 352 + 63
        }
    );
    assert!(matches!(parse_nifti(&bytes[..200]), Err(NiftiError::Truncated { .. })));
    assert!(matches!(parse_nifti(&bytes[..2]), Err(NiftiError::Truncated { .. })));
}

#[test]
fn bad_header_size_and_datatype() {
    let (_, mut bytes) = int16_fixture(false);
    bytes[0..4].copy_from_slice(&349i32.to_le_bytes());
    assert_eq!(parse_nifti(&bytes).unwrap_err(), NiftiError::BadHeaderSize);
    let (_, mut bytes) = int16_fixture(false);
    bytes[70..72].copy_from_slice(&2i16.to_le_bytes());
    assert_eq!(parse_nifti(&bytes).unwrap_err(), NiftiError::UnsupportedDatatype(2));
}

#[test]
fn fixture_slice_band() {
    let payload = vec![0u8; 4 * 4 * 20 * 2];
    let vol = parse_nifti(&write_nifti([4, 4, 20], 4, &payload, 1.0, 0.0, false)).unwrap();
    assert_eq!(select_open_lung_slices(&vol, SliceBand::default()).unwrap(), (6..14).collect::<Vec<_>>());
}
