//! Exercises the C ABI end to end: handles, status codes, error reporting,
//! and the checkpoint-to-video path.

use std::ffi::{CStr, CString};

use phantomgen_capi::*;

fn c_path(path: &std::path::Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pg_last_error_message()).to_string_lossy().into_owned() }
}

/// 3 frames of a 24x24 video holding a 8x8 square.
fn square_bits(t: u32, h: u32, w: u32) -> Vec<u8> {
    let mut bits = vec![0u8; (t * h * w) as usize];
    for f in 0..t {
        for y in 8..16 {
            for x in 8..16 {
                bits[(f * h * w + y * w + x) as usize] = 1;
            }
        }
    }
    bits
}

#[test]
fn version_is_exposed() {
    let v = unsafe { CStr::from_ptr(pg_version()) }.to_str().unwrap();
    assert!(!v.is_empty());
}

#[test]
fn mask_video_roundtrip_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let bits = square_bits(3, 24, 24);
    let mut video: *mut PgMaskVideo = std::ptr::null_mut();
    unsafe {
        assert_eq!(pg_mask_video_from_bits(3, 24, 24, bits.as_ptr(), &mut video), PgStatus::PgOk);
        assert_eq!(pg_mask_video_frames(video), 3);
        assert_eq!(pg_mask_video_width(video), 24);
        assert_eq!(pg_mask_video_height(video), 24);

        let path = c_path(&dir.path().join("v.mvb"));
        assert_eq!(pg_mask_video_save(video, path.as_ptr()), PgStatus::PgOk);
        let mut loaded: *mut PgMaskVideo = std::ptr::null_mut();
        assert_eq!(pg_mask_video_load(path.as_ptr(), &mut loaded), PgStatus::PgOk);

        let mut buf = vec![0u8; 24 * 24];
        assert_eq!(pg_mask_video_frame_bits(loaded, 0, buf.as_mut_ptr(), buf.len()), PgStatus::PgOk);
        assert_eq!(buf, bits[..24 * 24]);
        assert_eq!(
            pg_mask_video_frame_bits(loaded, 9, buf.as_mut_ptr(), buf.len()),
            PgStatus::PgErrInvalidArgument
        );
        assert!(last_error().contains("out of range"));

        pg_mask_video_free(video);
        pg_mask_video_free(loaded);
    }
}

#[test]
fn load_errors_set_message() {
    let mut video: *mut PgMaskVideo = std::ptr::null_mut();
    let path = CString::new("/nonexistent/nope.mvb").unwrap();
    let status = unsafe { pg_mask_video_load(path.as_ptr(), &mut video) };
    assert_eq!(status, PgStatus::PgErrIo);
    assert!(!last_error().is_empty());
    let status = unsafe { pg_mask_video_load(std::ptr::null(), &mut video) };
    assert_eq!(status, PgStatus::PgErrNullArgument);
}

#[test]
fn encode_decode_through_the_abi() {
    let bits = square_bits(4, 24, 24);
    unsafe {
        let mut video: *mut PgMaskVideo = std::ptr::null_mut();
        assert_eq!(pg_mask_video_from_bits(4, 24, 24, bits.as_ptr(), &mut video), PgStatus::PgOk);

        let mut series: *mut PgEfdSeries = std::ptr::null_mut();
        assert_eq!(pg_encode_video(video, 6, 128, &mut series), PgStatus::PgOk);
        assert_eq!(pg_series_channels(series), 24);
        assert_eq!(pg_series_len(series), 4);

        let mut values = vec![0.0f64; 24 * 4];
        assert_eq!(pg_series_values(series, values.as_mut_ptr(), values.len()), PgStatus::PgOk);
        // a1 of a centered square is positive and close to half its side.
        assert!(values[0] > 2.0 && values[0] < 6.0, "a1 = {}", values[0]);

        let mut rebuilt: *mut PgEfdSeries = std::ptr::null_mut();
        assert_eq!(pg_series_from_values(6, 4, values.as_ptr(), &mut rebuilt), PgStatus::PgOk);

        let mut decoded: *mut PgMaskVideo = std::ptr::null_mut();
        assert_eq!(pg_series_to_video(rebuilt, 32, 32, 128, &mut decoded), PgStatus::PgOk);
        assert_eq!(pg_mask_video_frames(decoded), 4);
        // Decoded frames keep the one-component/no-hole guarantee.
        let mut frame = vec![0u8; 32 * 32];
        assert_eq!(pg_mask_video_frame_bits(decoded, 0, frame.as_mut_ptr(), frame.len()), PgStatus::PgOk);
        assert!(frame.iter().any(|&b| b == 1));

        pg_mask_video_free(video);
        pg_mask_video_free(decoded);
        pg_series_free(series);
        pg_series_free(rebuilt);
    }
}

#[test]
fn dtw_through_the_abi() {
    let x = [1.0, 2.0, 3.0];
    let y = [1.0, 2.0, 2.0, 3.0];
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(pg_dtw_distance(x.as_ptr(), 3, y.as_ptr(), 4, &mut out), PgStatus::PgOk);
        assert_eq!(out, 0.0);
        assert_eq!(pg_dtw_distance(x.as_ptr(), 0, y.as_ptr(), 4, &mut out), PgStatus::PgErrMetrics);
    }
}

#[test]
fn feature_curves_through_the_abi() {
    let bits = square_bits(2, 24, 24);
    unsafe {
        let mut video: *mut PgMaskVideo = std::ptr::null_mut();
        assert_eq!(pg_mask_video_from_bits(2, 24, 24, bits.as_ptr(), &mut video), PgStatus::PgOk);
        let mut area = vec![0.0f64; 2];
        assert_eq!(pg_feature_curve(video, PG_FEATURE_AREA, area.as_mut_ptr(), 2), PgStatus::PgOk);
        assert_eq!(area, vec![64.0, 64.0]);
        let mut convexity = vec![0.0f64; 2];
        assert_eq!(pg_feature_curve(video, PG_FEATURE_CONVEXITY, convexity.as_mut_ptr(), 2), PgStatus::PgOk);
        assert!((convexity[0] - 1.0).abs() < 1e-12);
        assert_eq!(
            pg_feature_curve(video, 42, area.as_mut_ptr(), 2),
            PgStatus::PgErrInvalidArgument
        );
        pg_mask_video_free(video);
    }
}

#[test]
fn model_generation_through_the_abi() {
    // Train a tiny model through the Rust API, checkpoint it, then drive
    // generation purely through the C surface.
    use std::collections::BTreeMap;

    let dir = tempfile::tempdir().unwrap();
    let t_len = 12;
    let series = phantomgen::synthetic::ellipse_series_dataset(8, t_len, 2, 5);
    let stats = phantomgen::efd::fit_norm(&series).unwrap();
    let dataset: Vec<phantomgen::diffusion::Tensor> = series
        .iter()
        .map(|s| {
            let (n, _) = phantomgen::efd::apply_norm(s, &stats).unwrap();
            phantomgen::diffusion::Tensor::from_vec(8, t_len, n.to_flat())
        })
        .collect();
    let cfg = phantomgen::diffusion::ModelConfig {
        width: 16,
        blocks: 1,
        heads: 2,
        ..phantomgen::diffusion::ModelConfig::reference(8, t_len)
    };
    let tc = phantomgen::diffusion::TrainConfig {
        steps: 30,
        batch: 4,
        k_steps: 20,
        ..Default::default()
    };
    let out = phantomgen::diffusion::train(&dataset, cfg, &tc).unwrap();
    let mut extras = BTreeMap::new();
    for (i, (lo, hi)) in stats.mins().iter().zip(stats.maxs()).enumerate() {
        extras.insert(format!("norm.min.{i}"), format!("{lo:.17e}"));
        extras.insert(format!("norm.max.{i}"), format!("{hi:.17e}"));
    }
    extras.insert("d".into(), "2".into());
    extras.insert("n_points".into(), "128".into());
    extras.insert("k_steps".into(), "20".into());
    extras.insert("canvas_w".into(), "48".into());
    extras.insert("canvas_h".into(), "48".into());
    let ckpt = dir.path().join("model.efdm");
    phantomgen::diffusion::save_checkpoint(&ckpt, &out.model, &extras).unwrap();

    unsafe {
        let mut model: *mut PgModel = std::ptr::null_mut();
        let path = c_path(&ckpt);
        assert_eq!(pg_model_load(path.as_ptr(), &mut model), PgStatus::PgOk);
        assert_eq!(pg_model_channels(model), 8);
        assert_eq!(pg_model_seq_len(model), t_len as u32);

        let mut a: *mut PgMaskVideo = std::ptr::null_mut();
        let mut b: *mut PgMaskVideo = std::ptr::null_mut();
        assert_eq!(pg_model_generate_video(model, 0, 7, &mut a), PgStatus::PgOk);
        assert_eq!(pg_model_generate_video(model, 0, 7, &mut b), PgStatus::PgOk);
        assert_eq!(pg_mask_video_frames(a), t_len as u32);
        assert_eq!(pg_mask_video_width(a), 48);
        // Same seed, same bits.
        let len = 48 * 48;
        let (mut ba, mut bb) = (vec![0u8; len], vec![0u8; len]);
        for f in 0..t_len as u32 {
            assert_eq!(pg_mask_video_frame_bits(a, f, ba.as_mut_ptr(), len), PgStatus::PgOk);
            assert_eq!(pg_mask_video_frame_bits(b, f, bb.as_mut_ptr(), len), PgStatus::PgOk);
            assert_eq!(ba, bb, "frame {f} differs between equal seeds");
        }

        let mut s: *mut PgEfdSeries = std::ptr::null_mut();
        assert_eq!(pg_model_sample_series(model, 0, 3, &mut s), PgStatus::PgOk);
        assert_eq!(pg_series_channels(s), 8);
        pg_series_free(s);
        pg_mask_video_free(a);
        pg_mask_video_free(b);
        pg_model_free(model);
    }
}
