mod common;

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialectometry"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn matrix_phone_writes_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.tsv");
    let o = run(&[
        "matrix",
        "--metric",
        "phone",
        "--dataset",
        path(&common::data("mini_atlas.json")),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("8 sites, 28 cells"), "{}", stdout(&o));
    let golden = std::fs::read_to_string(common::data("mini_phone_string.tsv")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), golden);
}

#[test]
fn unknown_metric_is_a_usage_error() {
    let o = run(&[
        "matrix",
        "--metric",
        "nosuch",
        "--dataset",
        path(&common::data("mini_atlas.json")),
        "-o",
        "x.tsv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nosuch"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["matrix", "--metric", "phone"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn feature_same_without_words_names_the_requirement() {
    let dir = tempfile::tempdir().unwrap();
    let atlas = dir.path().join("bare.json");
    std::fs::write(
        &atlas,
        r#"{"sites": [{"id": "A", "name": "A", "region_path": ["A"]}, {"id": "B", "name": "B", "region_path": ["B"]}],
            "concepts": [{"id": "c", "gloss": "c"}],
            "citations": [{"site": "A", "concept": "c", "form": "ba"}, {"site": "B", "concept": "c", "form": "pa"}],
            "isogloss_features": []}"#,
    )
    .unwrap();
    let out = dir.path().join("m.tsv");
    let o = run(&[
        "matrix",
        "--metric",
        "feature-same",
        "--dataset",
        path(&atlas),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("word"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn incomplete_matrix_exits_2_unless_imputed() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(common::data("mini_atlas.json")).unwrap())
            .unwrap();
    doc["sites"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"id": "I", "name": "I", "region_path": ["I"]}));
    let atlas = dir.path().join("gappy.json");
    std::fs::write(&atlas, doc.to_string()).unwrap();
    let out = dir.path().join("m.tsv");
    let o = run(&[
        "matrix",
        "--metric",
        "etymon",
        "--dataset",
        path(&atlas),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("A-I") || stderr(&o).contains("(A, I)"),
        "{}",
        stderr(&o)
    );
    let o = run(&[
        "matrix",
        "--metric",
        "etymon",
        "--impute-missing",
        "--dataset",
        path(&atlas),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("8 imputed"));
}

#[test]
fn compare_same_file_is_perfect() {
    let x = common::data("pair_x.tsv");
    let o = run(&["compare", path(&x), path(&x)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("1.000   1.000"), "{text}");
}

#[test]
fn compare_fixture_pair() {
    let o = run(&[
        "compare",
        path(&common::data("pair_x.tsv")),
        path(&common::data("pair_y.tsv")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("0.829   0.667"), "{text}");
    assert!(text.contains("rho = 0.8285714285714286"), "{text}");
    assert!(text.contains("K_c = 0.6666666666666666"), "{text}");
}

#[test]
fn compare_mismatched_sites_fails() {
    let o = run(&[
        "compare",
        path(&common::data("pair_x.tsv")),
        path(&common::data("line4.tsv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cluster_line_fixture_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["agglomerative", "pam"] {
        let out = dir.path().join(format!("{method}.json"));
        let o = run(&[
            "cluster",
            "--matrix",
            path(&common::data("line4.tsv")),
            "--method",
            method,
            "-o",
            path(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("split 2 | 2"));
        let tree =
            dialectometry::cluster::ClusterNode::from_json(&std::fs::read_to_string(&out).unwrap())
                .unwrap();
        let (a, b) = dialectometry::cluster::cut_top(&tree).unwrap();
        assert_eq!(a, ["s0", "s1"]);
        assert_eq!(b, ["s10", "s11"]);
    }
}

#[test]
fn cluster_single_site_fails() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("one.tsv");
    std::fs::write(&m, "a\na\t0\n").unwrap();
    let o = run(&[
        "cluster",
        "--matrix",
        path(&m),
        "-o",
        path(&dir.path().join("t.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "cluster",
        "--matrix",
        path(&common::data("line4.tsv")),
        "--method",
        "kmeans",
        "-o",
        "t.json",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn silhouette_report_matches_golden() {
    let o = run(&[
        "silhouette",
        "--matrix",
        path(&common::data("tight_pairs.tsv")),
        "--tree",
        path(&common::data("tight_pairs_tree.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        text,
        std::fs::read_to_string(common::data("tight_pairs_silhouette.txt")).unwrap()
    );
    assert!(text.lines().any(|l| l.starts_with("*********   p")));
    assert!(text.ends_with("overall s\u{304} = 0.900\n"));
}

#[test]
fn silhouette_uses_region_paths_and_rejects_bad_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.tsv");
    let t = dir.path().join("t.json");
    let atlas = common::data("mini_atlas.json");
    assert_eq!(
        run(&[
            "matrix",
            "--metric",
            "etymon",
            "--dataset",
            path(&atlas),
            "-o",
            path(&m)
        ])
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        run(&["cluster", "--matrix", path(&m), "-o", path(&t)])
            .status
            .code(),
        Some(0)
    );
    let o = run(&[
        "silhouette",
        "--matrix",
        path(&m),
        "--tree",
        path(&t),
        "--dataset",
        path(&atlas),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Tory, Donegal, Ulster, Ireland"));
    let o = run(&[
        "silhouette",
        "--matrix",
        path(&m),
        "--tree",
        path(&t),
        "--node",
        "LLLLLLLL",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "silhouette",
        "--matrix",
        path(&common::data("line4.tsv")),
        "--tree",
        path(&t),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pipeline_matches_golden_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "pipeline",
        "--dataset",
        path(&common::data("mini_atlas.json")),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = common::data("pipeline_golden");
    let mut names: Vec<_> = std::fs::read_dir(&golden)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut produced: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    produced.sort();
    assert_eq!(names, produced);
    for name in names {
        assert_eq!(
            std::fs::read(golden.join(&name)).unwrap(),
            std::fs::read(out.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let text = stdout(&o);
    assert!(text.contains("Part.   Aggl."));
    for label in ["Isoglosses", "Phone string comparison", "Word identity"] {
        assert_eq!(
            text.lines().filter(|l| l.starts_with(label)).count(),
            2,
            "{label}"
        );
    }
}

#[test]
fn pipeline_missing_dataset_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "pipeline",
        "--dataset",
        path(&dir.path().join("nope.json")),
        "-o",
        path(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stage load"));
}

#[test]
fn pipeline_unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = run(&[
        "pipeline",
        "--dataset",
        path(&common::data("mini_atlas.json")),
        "-o",
        path(&blocker.join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stage output"), "{}", stderr(&o));
}

#[test]
fn pipeline_read_only_directory_fails() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ro");
    std::fs::create_dir(&out).unwrap();
    std::fs::set_permissions(&out, std::fs::Permissions::from_mode(0o555)).unwrap();
    if tempfile::NamedTempFile::new_in(&out).is_ok() {
        // Permission bits are not enforced for this user.
        return;
    }
    let o = run(&[
        "pipeline",
        "--dataset",
        path(&common::data("mini_atlas.json")),
        "-o",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::set_permissions(&out, std::fs::Permissions::from_mode(0o755)).unwrap();
}
