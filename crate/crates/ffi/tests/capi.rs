use std::ffi::{CStr, CString};
use std::io::Write;
use std::path::PathBuf;
use std::ptr;

use fastread_ffi::*;

fn write_corpus(dir: &tempfile::TempDir, labeled: bool) -> CString {
    let path = dir.path().join("c.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    if labeled {
        writeln!(f, "Document Title,Abstract,Year,PDF Link,label").unwrap();
    } else {
        writeln!(f, "Document Title,Abstract,Year,PDF Link").unwrap();
    }
    for i in 0..60 {
        let rel = i % 10 == 0;
        let text = if rel {
            format!("defect prediction model {i},metrics fault proneness study {i}")
        } else {
            format!("requirements elicitation {i},stakeholder interview survey {i}")
        };
        if labeled {
            writeln!(f, "{text},2015,,{}", if rel { "yes" } else { "no" }).unwrap();
        } else {
            writeln!(f, "{text},2015,").unwrap();
        }
    }
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = fr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn corpus_lifecycle_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_corpus(&dir, true);
    unsafe {
        let mut c: *mut FrCorpus = ptr::null_mut();
        assert_eq!(fr_corpus_load_csv(path.as_ptr(), &mut c), FrStatus::Ok);
        assert!(fr_last_error().is_null());
        let mut n = 0usize;
        assert_eq!(fr_corpus_len(c, &mut n), FrStatus::Ok);
        assert_eq!(n, 60);
        assert_eq!(fr_corpus_relevant(c, &mut n), FrStatus::Ok);
        assert_eq!(n, 6);
        fr_corpus_free(c);

        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        assert_eq!(fr_corpus_load_csv(missing.as_ptr(), &mut c), FrStatus::Io);
        assert!(last_error().contains("nope.csv"));
        assert_eq!(fr_corpus_load_csv(ptr::null(), &mut c), FrStatus::NullPointer);
        assert_eq!(fr_corpus_len(ptr::null(), &mut n), FrStatus::NullPointer);
        fr_corpus_free(ptr::null_mut());
    }
}

#[test]
fn interactive_review() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_corpus(&dir, false);
    let code = CString::new("HUTM").unwrap();
    unsafe {
        let mut c: *mut FrCorpus = ptr::null_mut();
        assert_eq!(fr_corpus_load_csv(path.as_ptr(), &mut c), FrStatus::Ok);
        let mut r: *mut FrReview = ptr::null_mut();
        assert_eq!(fr_review_new(c, code.as_ptr(), 7, &mut r), FrStatus::Ok);
        fr_corpus_free(c);

        let mut ids = [0usize; 10];
        let mut len = 0usize;
        let mut phase = FrPhase::Certainty;
        let mut seen = std::collections::HashSet::new();
        let mut rounds = 0;
        loop {
            let st = fr_review_next(r, ids.as_mut_ptr(), ids.len(), &mut len, &mut phase);
            if st == FrStatus::Exhausted {
                break;
            }
            assert_eq!(st, FrStatus::Ok, "{}", last_error());
            if rounds == 0 {
                assert_eq!(phase, FrPhase::Random);
            }
            for &id in &ids[..len] {
                assert!(seen.insert(id));
                assert_eq!(fr_review_label(r, id, id % 10 == 0), FrStatus::Ok);
            }
            rounds += 1;
        }
        assert_eq!(seen.len(), 60);
        assert_eq!(rounds, 6);
        let (mut found, mut coded, mut total) = (0, 0, 0);
        assert_eq!(fr_review_status(r, &mut found, &mut coded, &mut total), FrStatus::Ok);
        assert_eq!((found, coded, total), (6, 60, 60));
        assert_eq!(fr_review_label(r, 99, true), FrStatus::InvalidArgument);
        assert_eq!(fr_review_next(r, ids.as_mut_ptr(), 0, &mut len, ptr::null_mut()), FrStatus::InvalidArgument);
        fr_review_free(r);

        let bad = CString::new("HUXX").unwrap();
        let mut c: *mut FrCorpus = ptr::null_mut();
        assert_eq!(fr_corpus_load_csv(path.as_ptr(), &mut c), FrStatus::Ok);
        assert_eq!(fr_review_new(c, bad.as_ptr(), 1, &mut r), FrStatus::InvalidArgument);
        assert!(last_error().contains("HUXX"));
        fr_corpus_free(c);
    }
}

#[test]
fn simulation_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = write_corpus(&dir, true);
    let code = CString::new("HUTM").unwrap();
    unsafe {
        let mut c: *mut FrCorpus = ptr::null_mut();
        assert_eq!(fr_corpus_load_csv(labeled.as_ptr(), &mut c), FrStatus::Ok);
        let mut s = FrSimSummary::default();
        assert_eq!(fr_simulate(c, code.as_ptr(), 3, 0.95, &mut s), FrStatus::Ok);
        assert_eq!((s.candidates, s.relevant), (60, 6));
        assert!(s.x95 >= 6 && s.x95 <= 60);
        assert!((s.wss95 - (0.95 - s.x95 as f64 / 60.0)).abs() < 1e-12);
        fr_corpus_free(c);

        let unlabeled_dir = tempfile::tempdir().unwrap();
        let unlabeled = write_corpus(&unlabeled_dir, false);
        assert_eq!(fr_corpus_load_csv(unlabeled.as_ptr(), &mut c), FrStatus::Ok);
        assert_eq!(fr_simulate(c, code.as_ptr(), 3, 0.95, &mut s), FrStatus::Corpus);
        fr_corpus_free(c);

        let mut w = 0.0;
        assert_eq!(fr_wss_at_95(670, 7002, &mut w), FrStatus::Ok);
        assert!((w - 0.8543).abs() < 1e-4);
        assert_eq!(fr_wss_at_95(1, 0, &mut w), FrStatus::InvalidArgument);
    }
    let v = unsafe { CStr::from_ptr(fr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/fastread.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "fr_corpus_load_csv",
        "fr_review_new",
        "fr_review_next",
        "fr_simulate",
        "fr_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
