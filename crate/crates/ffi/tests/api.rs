use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use egots::backbones::BackboneKind;
use egots::datasynth::{planted_motif_dataset, PlantedConfig};
use egots::knngraph::knn_stomp_cross;
use egots::trainer::{infer, train, TrainConfig};
use egots_ffi::*;

fn last_error() -> String {
    let p = egots_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

unsafe fn series(dims: &[Vec<f64>]) -> *mut EgotsSeries {
    let flat: Vec<f64> = dims.concat();
    let mut out = ptr::null_mut();
    assert_eq!(egots_series_new(flat.as_ptr(), dims.len(), dims[0].len(), &mut out), EgotsStatus::Ok);
    out
}

unsafe fn labels(v: &[usize], n_classes: usize) -> *mut EgotsLabels {
    let mut out = ptr::null_mut();
    assert_eq!(egots_labels_new(v.as_ptr(), v.len(), n_classes, &mut out), EgotsStatus::Ok);
    out
}

unsafe fn read_labels(l: *const EgotsLabels) -> Vec<usize> {
    let mut buf = vec![usize::MAX; egots_labels_len(l)];
    assert_eq!(egots_labels_copy(l, buf.as_mut_ptr(), buf.len()), EgotsStatus::Ok);
    buf
}

#[test]
fn graph_matches_library() {
    let ds = planted_motif_dataset(&PlantedConfig::new(2, 4, 16, 0.25, 1)).unwrap();
    let want = knn_stomp_cross(&ds.test.series, &ds.train.series, 16, 4).unwrap();
    unsafe {
        let q = series(ds.test.series.dims());
        let t = series(ds.train.series.dims());
        assert_eq!(egots_series_len(q), ds.test.series.len());
        assert_eq!(egots_series_n_dims(q), 1);
        let mut g = ptr::null_mut();
        assert_eq!(egots_graph_cross(q, t, 16, 4, 2, &mut g), EgotsStatus::Ok);
        assert_eq!((egots_graph_n_rows(g), egots_graph_k(g), egots_graph_m(g)), (want.n_rows(), 4, 16));
        assert_eq!(egots_graph_is_self(g), 0);
        let mut row = [0usize; 4];
        for i in [0, 7, want.n_rows() - 1] {
            assert_eq!(egots_graph_row(g, i, row.as_mut_ptr(), 4), EgotsStatus::Ok);
            assert_eq!(&row[..], want.row(i));
        }

        let dir = tempfile::tempdir().unwrap();
        let p = cpath(&dir.path().join("g.knng"));
        assert_eq!(egots_graph_save(g, p.as_ptr()), EgotsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(egots_graph_load(p.as_ptr(), &mut back), EgotsStatus::Ok);
        for i in 0..want.n_rows() {
            assert_eq!(egots_graph_row(back, i, row.as_mut_ptr(), 4), EgotsStatus::Ok);
            assert_eq!(&row[..], want.row(i));
        }

        let tl = labels(ds.train.labels.labels(), ds.train.labels.n_classes());
        let mut pred = ptr::null_mut();
        assert_eq!(egots_knn_predict(g, tl, 1, &mut pred), EgotsStatus::Ok);
        let lib = egots::knnclassify::knn_predict(&want, &ds.train.labels, 1).unwrap();
        assert_eq!(read_labels(pred), lib.labels());

        egots_labels_free(pred);
        egots_labels_free(tl);
        egots_graph_free(back);
        egots_graph_free(g);
        egots_series_free(q);
        egots_series_free(t);
    }
}

#[test]
fn smoothing_and_scores() {
    unsafe {
        let truth = labels(&[0, 0, 1, 1, 1, 1, 0, 0, 0, 2, 2, 2, 2, 0], 3);
        let noisy = labels(&[0, 0, 1, 2, 1, 1, 0, 0, 0, 2, 2, 1, 2, 0], 3);
        let mut s = ptr::null_mut();
        assert_eq!(egots_smooth(noisy, 3, &mut s), EgotsStatus::Ok);
        let want = egots::postprocess::smooth_labels(&read_labels(noisy), 3).unwrap();
        assert_eq!(read_labels(s), want);
        let mut scores = EgotsScores::default();
        assert_eq!(egots_onset_f1(truth, truth, 0, &mut scores), EgotsStatus::Ok);
        assert_eq!((scores.f1, scores.n_true_onsets), (1.0, 2));
        assert_eq!(egots_onset_f1(noisy, truth, 4, &mut scores), EgotsStatus::Ok);
        assert!(scores.precision < 1.0);
        egots_labels_free(s);
        egots_labels_free(noisy);
        egots_labels_free(truth);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(egots_series_new(ptr::null(), 1, 5, &mut out), EgotsStatus::NullPointer);
        assert!(out.is_null());
        assert!(last_error().contains("data"));
        let x = [1.0, 2.0, 3.0, f64::NAN];
        assert_eq!(egots_series_new(x.as_ptr(), 1, 4, &mut out), EgotsStatus::Numerical);
        let s = series(&[vec![1.0, 2.0, 4.0, 3.0, 5.0, 0.0]]);
        assert!(egots_last_error().is_null());
        let mut g = ptr::null_mut();
        assert_eq!(egots_graph_self(s, 4, 1, 1, &mut g), EgotsStatus::Data);
        assert!(last_error().contains("neighbors"), "{}", last_error());
        assert_eq!(egots_graph_self(s, 10, 1, 1, &mut g), EgotsStatus::InvalidArgument);
        assert!(g.is_null());

        let missing = CString::new("/nonexistent/egots.csv").unwrap();
        assert_eq!(egots_series_read_csv(missing.as_ptr(), &mut out), EgotsStatus::Io);
        let mut l = ptr::null_mut();
        assert_eq!(egots_labels_new([0usize, 3].as_ptr(), 2, 2, &mut l), EgotsStatus::InvalidArgument);
        let l = labels(&[0, 1, 1], 2);
        let mut small = [0usize; 2];
        assert_eq!(egots_labels_copy(l, small.as_mut_ptr(), 2), EgotsStatus::InvalidArgument);
        assert_eq!(egots_labels_n_classes(l), 2);
        egots_labels_free(l);
        egots_series_free(s);
        egots_series_free(ptr::null_mut());
        assert_eq!(egots_series_len(ptr::null()), 0);
        let v = CStr::from_ptr(egots_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn model_inference_matches_library() {
    let ds = planted_motif_dataset(&PlantedConfig::new(2, 5, 16, 0.25, 3)).unwrap();
    let mut cfg = TrainConfig::new(16, 3);
    cfg.backbone = BackboneKind::Resnet;
    cfg.epochs = 1;
    cfg.threads = Some(1);
    let (model, _) = train(&ds.train.series, &ds.train.labels, Some((&ds.valid.series, &ds.valid.labels)), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.egow");
    model.save(&path).unwrap();
    let want = infer(&ds.test.series, &ds.train.series, &ds.train.labels, &model, Some(1)).unwrap();
    let want_smooth = model.smooth(&want).unwrap();
    unsafe {
        let p = cpath(&path);
        let mut m = ptr::null_mut();
        assert_eq!(egots_model_load(p.as_ptr(), &mut m), EgotsStatus::Ok);
        assert_eq!(egots_model_m(m), 16);
        assert_eq!(egots_model_window(m), model.manifest.window);
        let test = series(ds.test.series.dims());
        let trs = series(ds.train.series.dims());
        let trl = labels(ds.train.labels.labels(), 0);
        let mut pred = ptr::null_mut();
        assert_eq!(egots_infer(m, test, trs, trl, 1, 0, &mut pred), EgotsStatus::Ok);
        assert_eq!(read_labels(pred), want.labels());
        egots_labels_free(pred);
        assert_eq!(egots_infer(m, test, trs, trl, 1, 1, &mut pred), EgotsStatus::Ok);
        assert_eq!(read_labels(pred), want_smooth.labels());
        egots_labels_free(pred);

        let bad = cpath(&dir.path().join("nope.egow"));
        let mut none = ptr::null_mut();
        assert_eq!(egots_model_load(bad.as_ptr(), &mut none), EgotsStatus::Io);
        egots_labels_free(trl);
        egots_series_free(trs);
        egots_series_free(test);
        egots_model_free(m);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libegots_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
