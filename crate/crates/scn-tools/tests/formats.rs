//! Round-trip and error-path tests for the on-disk formats.

use scn_core::data;
use scn_core::netspec::ArchSpec;
use scn_core::scn::SCNModel;
use scn_core::transforms::TransformFamily;
use scn_tools::error::ToolError;
use scn_tools::{checkpoint, cloudtxt, container, idx};

#[test]
fn idx_round_trip_and_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let set = data::gen_shapes2d(50, 3).unwrap();
    let ip = dir.path().join("imgs.idx");
    let lp = dir.path().join("labels.idx");
    idx::write_idx(&set, &ip, &lp).unwrap();
    let loaded = idx::load_idx(&ip, &lp).unwrap();
    assert_eq!(loaded.labels, set.labels);
    assert_eq!(loaded.p, set.p);
    // u8 quantization round-trips within half a step
    for (a, b) in loaded.images.iter().zip(&set.images) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }

    // bad magic
    let mut bytes = std::fs::read(&ip).unwrap();
    bytes[3] = 0x07;
    let bad = dir.path().join("bad.idx");
    std::fs::write(&bad, &bytes).unwrap();
    let err = idx::load_idx(&bad, &lp).unwrap_err();
    assert!(matches!(err, ToolError::Data(ref m) if m.contains("magic")), "{err}");

    // truncation
    let trunc = dir.path().join("trunc.idx");
    std::fs::write(&trunc, &std::fs::read(&ip).unwrap()[..200]).unwrap();
    let err = idx::load_idx(&trunc, &lp).unwrap_err();
    assert!(matches!(err, ToolError::Data(ref m) if m.contains("truncated")), "{err}");

    // count mismatch
    let small = data::gen_shapes2d(40, 3).unwrap();
    let lp2 = dir.path().join("labels2.idx");
    idx::write_idx(&small, &dir.path().join("i2.idx"), &lp2).unwrap();
    let err = idx::load_idx(&ip, &lp2).unwrap_err();
    assert!(matches!(err, ToolError::Data(ref m) if m.contains("mismatch")), "{err}");
}

#[test]
fn container_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = data::gen_shapes2d(30, 5).unwrap();
    let path = dir.path().join("imgs.scnd");
    container::save_images(&imgs, &path).unwrap();
    let back = container::load(&path).unwrap();
    let b = back.as_images().unwrap();
    assert_eq!(b.images, imgs.images);
    assert_eq!(b.labels, imgs.labels);
    assert_eq!((b.p, b.channels, b.classes), (imgs.p, imgs.channels, imgs.classes));

    let clouds = data::gen_clouds3d(12, 5).unwrap();
    let cpath = dir.path().join("clouds.scnd");
    container::save_clouds(&clouds, &cpath).unwrap();
    let back = container::load(&cpath).unwrap();
    let c = back.as_clouds().unwrap();
    assert_eq!(c.clouds, clouds.clouds);
    assert_eq!(c.labels, clouds.labels);
    assert_eq!(c.n_points, clouds.n_points);

    // corrupt magic
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, bytes).unwrap();
    assert!(container::load(&path).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let arch = ArchSpec::mlp(8, 1, (16, 1), 10);
    let model = SCNModel::<f32>::init(TransformFamily::Scaling, arch, 4, 9).unwrap();
    let p1 = dir.path().join("a.scn1");
    let p2 = dir.path().join("b.scn1");
    checkpoint::save(&model, &p1).unwrap();
    let back = checkpoint::load(&p1).unwrap();
    assert_eq!(back.config.params, model.config.params);
    assert_eq!(back.bank.values, model.bank.values);
    assert_eq!(back.family, model.family);
    assert_eq!(back.arch, model.arch);
    checkpoint::save(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    // truncated blob is rejected with a data error
    let bytes = std::fs::read(&p1).unwrap();
    std::fs::write(&p1, &bytes[..bytes.len() - 8]).unwrap();
    let err = checkpoint::load(&p1).unwrap_err();
    assert!(matches!(err, ToolError::Data(ref m) if m.contains("truncated")), "{err}");
}

#[test]
fn cloud_text_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pts = vec![[0.1f32, -0.2, 0.3], [1.0, 0.0, -1.0], [0.25, 0.5, 0.75]];
    let path = dir.path().join("cloud.txt");
    cloudtxt::write_cloud(&pts, &path).unwrap();
    assert_eq!(cloudtxt::read_cloud(&path).unwrap(), pts);

    std::fs::write(&path, "1.0 2.0\n").unwrap();
    assert!(cloudtxt::read_cloud(&path).is_err());
    std::fs::write(&path, "").unwrap();
    assert!(cloudtxt::read_cloud(&path).is_err());
}
