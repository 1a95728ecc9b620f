use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qrc_core::data::{gen_synthetic, SyntheticKind};
use qrc_core::readout::{forecast_qrc, train_readout};
use qrc_core::reservoir::{run_reservoir, ReservoirConfig};
use qrc_ffi::*;

const CONFIG: &str = r#"{"n": 3, "washout": 20, "kappa": 6}"#;

fn series(len: usize) -> Vec<f64> {
    gen_synthetic(SyntheticKind::Sine, len, 0).unwrap()
}

fn core_config() -> ReservoirConfig {
    serde_json::from_str(CONFIG).unwrap()
}

fn reservoir() -> *mut QrcReservoir {
    let json = CString::new(CONFIG).unwrap();
    let mut res = ptr::null_mut();
    assert_eq!(
        unsafe { qrc_reservoir_new(json.as_ptr(), &mut res) },
        QrcStatus::Ok
    );
    assert!(!res.is_null());
    res
}

fn last_error() -> String {
    let p = qrc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn features_match_core() {
    let s = series(80);
    let res = reservoir();
    unsafe {
        assert_eq!(qrc_reservoir_qubits(res), 3);
        let mut features = ptr::null_mut();
        assert_eq!(
            qrc_reservoir_run(res, s.as_ptr(), s.len(), &mut features),
            QrcStatus::Ok
        );
        let (rows, cols) = (qrc_features_rows(features), qrc_features_cols(features));
        assert_eq!((rows, cols), (60, 4));
        let mut flat = vec![0.0; rows * cols];
        assert_eq!(
            qrc_features_copy(features, flat.as_mut_ptr(), flat.len()),
            QrcStatus::Ok
        );
        let expected = run_reservoir(&s, &core_config()).unwrap().features;
        for r in 0..rows {
            assert_eq!(&flat[r * cols..(r + 1) * cols], expected.row(r).as_slice());
        }

        // readout through the ABI matches the core readout
        let targets = &s[21..80];
        let train_rows = 59;
        let mut sub = ptr::null_mut();
        let prefix = &s[..80 - 1];
        assert_eq!(
            qrc_reservoir_run(res, prefix.as_ptr(), prefix.len(), &mut sub),
            QrcStatus::Ok
        );
        assert_eq!(qrc_features_rows(sub), train_rows);
        let mut weights = ptr::null_mut();
        assert_eq!(
            qrc_train_readout(sub, targets.as_ptr(), targets.len(), &mut weights),
            QrcStatus::Ok
        );
        let core_weights = train_readout(&expected.rows(0, train_rows), targets).unwrap();
        let mut w = vec![0.0; qrc_weights_len(weights)];
        assert_eq!(
            qrc_weights_copy(weights, w.as_mut_ptr(), w.len()),
            QrcStatus::Ok
        );
        assert_eq!(w, core_weights.values());

        let mut predictions = vec![0.0; train_rows];
        assert_eq!(
            qrc_predict_open_loop(sub, weights, predictions.as_mut_ptr(), predictions.len()),
            QrcStatus::Ok
        );
        assert!(predictions
            .iter()
            .zip(targets)
            .all(|(p, t)| (p - t).abs() < 0.1));

        qrc_weights_free(weights);
        qrc_features_free(sub);
        qrc_features_free(features);
        qrc_reservoir_free(res);
    }
}

#[test]
fn forecast_matches_core() {
    let s = series(90);
    let res = reservoir();
    let mut open = vec![0.0; 15];
    let mut closed = vec![0.0; 15];
    let (mut open_mse, mut closed_mse) = (0.0, 0.0);
    let status = unsafe {
        qrc_forecast(
            res,
            s.as_ptr(),
            s.len(),
            15,
            open.as_mut_ptr(),
            closed.as_mut_ptr(),
            &mut open_mse,
            &mut closed_mse,
        )
    };
    assert_eq!(status, QrcStatus::Ok);
    let core = forecast_qrc(&s, &core_config(), 15, "series").unwrap();
    assert_eq!(open, core.open_loop.predictions);
    assert_eq!(closed, core.closed_loop.predictions);
    assert_eq!(
        (open_mse, closed_mse),
        (core.open_loop.mse, core.closed_loop.mse)
    );
    // NULL outputs are skipped
    let status = unsafe {
        qrc_forecast(
            res,
            s.as_ptr(),
            s.len(),
            15,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, QrcStatus::Ok);
    unsafe { qrc_reservoir_free(res) };
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut res = ptr::null_mut();
        let bad = CString::new(r#"{"n": 42}"#).unwrap();
        assert_eq!(
            qrc_reservoir_new(bad.as_ptr(), &mut res),
            QrcStatus::InvalidArgument
        );
        assert!(res.is_null());
        assert!(last_error().contains("42"));

        let typo = CString::new(r#"{"qubits": 3}"#).unwrap();
        assert_eq!(
            qrc_reservoir_new(typo.as_ptr(), &mut res),
            QrcStatus::InvalidArgument
        );

        assert_eq!(
            qrc_reservoir_new(ptr::null(), ptr::null_mut()),
            QrcStatus::NullPointer
        );

        let res = reservoir();
        let mut features = ptr::null_mut();
        let out_of_range = [0.5, 1.5, 0.2];
        let big = vec![0.5; 30];
        assert_eq!(
            qrc_reservoir_run(res, out_of_range.as_ptr(), 3, &mut features),
            QrcStatus::Data
        );
        let status = qrc_reservoir_run(res, big.as_ptr(), 3, &mut features);
        assert_eq!(status, QrcStatus::Data, "series shorter than washout");
        assert!(last_error().contains("washout"));
        let mut oob = vec![0.4; 30];
        oob[25] = -0.1;
        assert_eq!(
            qrc_reservoir_run(res, oob.as_ptr(), oob.len(), &mut features),
            QrcStatus::InvalidArgument
        );
        assert_eq!(
            qrc_reservoir_run(ptr::null(), big.as_ptr(), big.len(), &mut features),
            QrcStatus::NullPointer
        );
        assert_eq!(
            qrc_reservoir_run(res, ptr::null(), 5, &mut features),
            QrcStatus::NullPointer
        );

        assert_eq!(
            qrc_reservoir_run(res, big.as_ptr(), big.len(), &mut features),
            QrcStatus::Ok
        );
        let mut small = [0.0; 2];
        assert_eq!(
            qrc_features_copy(features, small.as_mut_ptr(), 2),
            QrcStatus::InvalidArgument
        );
        assert!(last_error().contains("needed"));

        qrc_features_free(features);
        qrc_reservoir_free(res);
        qrc_reservoir_free(ptr::null_mut());
        qrc_features_free(ptr::null_mut());
        qrc_weights_free(ptr::null_mut());
        assert_eq!(qrc_features_rows(ptr::null()), 0);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qrc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qrc.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct QrcReservoir QrcReservoir;",
        "QRC_STATUS_NULL_POINTER = 1",
        "qrc_reservoir_new(",
        "qrc_reservoir_run(",
        "qrc_train_readout(",
        "qrc_predict_open_loop(",
        "qrc_forecast(",
        "qrc_last_error_message(",
        "qrc_weights_free(",
    ] {
        assert!(text.contains(name), "{name}");
    }
}

/// Compile and run the C smoke program against the static library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = [
        deps.join("libqrc_ffi.a"),
        deps.parent().unwrap().join("libqrc_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists())
    .expect("static library built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .expect("C compiler available");
    assert!(status.success(), "cc failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "smoke exited with {:?}",
        out.status.code()
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("qrc "));
}
