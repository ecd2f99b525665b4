mod common;

use std::collections::BTreeSet;

use freqscope::io::Artifact;
use freqscope::manifest::{
    cache_key, cache_key_for_content, load_manifest, parse_manifest, ArtifactCache, PipelineDescriptor, SplitSpec,
};
use freqscope::{Error, Spectrum2D, SpectrumKind};
use proptest::prelude::*;
use tempfile::TempDir;

fn corpus(counts: &[(&str, usize)]) -> TempDir {
    let dir = TempDir::new().unwrap();
    for (label, n) in counts {
        let d = dir.path().join(label);
        std::fs::create_dir_all(&d).unwrap();
        for i in 0..*n {
            std::fs::write(d.join(format!("f{i:03}.png")), [i as u8]).unwrap();
        }
    }
    dir
}

fn manifest_json(labels: &[&str], split: Option<serde_json::Value>, seed: u64) -> String {
    let classes: Vec<_> = labels.iter().map(|l| serde_json::json!({"label": l, "root": l, "glob": "*.png"})).collect();
    let mut m = serde_json::json!({"name": "t", "seed": seed, "classes": classes});
    if let Some(s) = split {
        m["split"] = s;
    }
    m.to_string()
}

fn descriptor() -> PipelineDescriptor {
    PipelineDescriptor {
        transform: "dft_power".into(),
        crop: Some(64),
        highpass_kernel: Some(3),
        eps: 1e-12,
        version: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ratio_split_is_a_partition(n in 0usize..60, tr in 0.0..1.0f64, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let dir = corpus(&[("real", n), ("fake", n / 2)]);
        let va = (1.0 - tr) * frac;
        let split = serde_json::json!({"train": tr, "val": va, "test": 1.0 - tr - va});
        let m = parse_manifest(&manifest_json(&["real", "fake"], Some(split), seed), dir.path()).unwrap();
        for (class, s) in m.classes.iter().zip(m.split()) {
            let all: BTreeSet<_> = class.files.iter().cloned().collect();
            let parts = [&s.train, &s.val, &s.test];
            let union: BTreeSet<_> = parts.iter().flat_map(|p| p.iter().cloned()).collect();
            prop_assert_eq!(union, all);
            prop_assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), class.files.len());
            prop_assert!(s.unused.is_empty());
        }
        prop_assert_eq!(m.split(), m.split());
    }

    #[test]
    fn descriptor_fields_change_the_key(content in prop::collection::vec(any::<u8>(), 0..64), field in 0usize..5) {
        let base = descriptor();
        let mut other = base.clone();
        match field {
            0 => other.transform = "dft_magnitude".into(),
            1 => other.crop = None,
            2 => other.highpass_kernel = Some(5),
            3 => other.eps = 1e-9,
            _ => other.version = 2,
        }
        let k = cache_key_for_content(&content, &base);
        prop_assert_eq!(&k, &cache_key_for_content(&content, &base));
        prop_assert_ne!(k, cache_key_for_content(&content, &other));
    }
}

#[test]
fn minimal_manifest_gets_default_ratios() {
    let dir = corpus(&[("real", 50)]);
    let m = parse_manifest(&manifest_json(&["real"], None, 0), dir.path()).unwrap();
    assert_eq!(m.split, SplitSpec::Ratios { train: 0.78, val: 0.02, test: 0.2 });
    let s = &m.split()[0];
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (39, 1, 10));
}

#[test]
fn all_test_split() {
    let dir = corpus(&[("real", 7)]);
    let split = serde_json::json!({"train": 0, "val": 0, "test": 7});
    let m = parse_manifest(&manifest_json(&["real"], Some(split), 3), dir.path()).unwrap();
    assert_eq!(m.split()[0].test.len(), 7);
}

#[test]
fn seeds_change_the_order_but_not_the_sets() {
    let dir = corpus(&[("real", 30)]);
    let a = parse_manifest(&manifest_json(&["real"], None, 1), dir.path()).unwrap().split();
    let b = parse_manifest(&manifest_json(&["real"], None, 2), dir.path()).unwrap().split();
    assert_ne!(a, b);
    assert_eq!(a[0].train.len(), b[0].train.len());
}

#[test]
fn load_errors() {
    let dir = corpus(&[("real", 3)]);
    let dup = parse_manifest(&manifest_json(&["real", "real"], None, 0), dir.path());
    assert!(matches!(dup, Err(Error::Manifest(_))));
    let too_many = serde_json::json!({"train": 2, "val": 1, "test": 1});
    let err = parse_manifest(&manifest_json(&["real"], Some(too_many), 0), dir.path()).unwrap_err();
    assert!(err.to_string().contains('4') && err.to_string().contains('3'), "{err}");
    let missing = parse_manifest(&manifest_json(&["nothere"], None, 0), dir.path());
    assert!(matches!(missing, Err(Error::Io { .. })));
    assert!(parse_manifest("{\"name\": 1}", dir.path()).is_err());
    let path = dir.path().join("m.json");
    std::fs::write(&path, manifest_json(&["real"], None, 0)).unwrap();
    assert_eq!(load_manifest(&path).unwrap().classes[0].files.len(), 3);
}

#[test]
fn cache_round_trip_and_eviction() {
    let dir = TempDir::new().unwrap();
    let img = dir.path().join("x.png");
    std::fs::write(&img, b"pixels").unwrap();
    let key = cache_key(&img, &descriptor()).unwrap();
    let cache = ArtifactCache::open(dir.path().join("cache")).unwrap();
    let spec = Spectrum2D::new(2, 2, vec![1.0, 2.0, 3.0, 4.5], SpectrumKind::DftPower).unwrap();
    let art = Artifact::Spectrum(spec);
    assert!(cache.get(&key).is_none());
    cache.put(&key, &art).unwrap();
    assert_eq!(cache.get(&key), Some(art.clone()));
    let bin = cache.dir().join(format!("{key}.bin"));
    let bytes = std::fs::read(&bin).unwrap();
    assert_eq!(bytes, freqscope::io::encode(&art).unwrap());

    let mut corrupt = bytes.clone();
    *corrupt.last_mut().unwrap() ^= 1;
    std::fs::write(&bin, corrupt).unwrap();
    assert!(cache.get(&key).is_none());
    assert!(!bin.exists());
    let mut computed = 0;
    let got = cache
        .get_or_compute(&key, || {
            computed += 1;
            Ok(art.clone())
        })
        .unwrap();
    assert_eq!((got, computed), (art, 1));
    assert_eq!(cache.stats().unwrap().entries, 1);
    assert_eq!(cache.clear().unwrap(), 1);
    assert!(cache.put("not-a-key", &Artifact::Spectrum(Spectrum2D::new(1, 1, vec![0.0], SpectrumKind::DftPower).unwrap())).is_err());
}

#[test]
fn png_corpus_helper_loads() {
    let dir = TempDir::new().unwrap();
    common::write_png_corpus(dir.path(), &["real", "gan"], 4, 8, 5);
    let m = load_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.classes.len(), 2);
    assert!(m.classes.iter().all(|c| c.files.len() == 4));
}
