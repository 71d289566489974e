use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const XML_A: &str = r#"<treebank>
<sentence id="1" document_id="urn:a">
<word id="1" form="ἀλλ’" lemma="ἀλλά" postag="c--------" head="3" relation="AuxY"/>
<word id="2" form="οὐδέ" lemma="οὐδέ" postag="d--------" head="3" relation="AuxZ"/>
<word id="3" form="ἔφη" lemma="φημί" postag="v3siia---" head="0" relation="PRED_CO"/>
</sentence>
</treebank>"#;

const XML_B: &str = r#"<treebank>
<sentence id="1" document_id="urn:b">
<word id="1" form="ταῦτα" lemma="οὗτος" postag="p-p---na-" head="2" relation="OBJ_AP"/>
<word id="2" insertion_id="0002e" artificial="elliptic" relation="PRED" head="0"/>
<word id="3" form="δ’" lemma="δέ" postag="g--------" head="0" relation="AuxY"/>
</sentence>
</treebank>"#;

fn agdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agdt"))
        .args(args)
        .output()
        .expect("run agdt")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parse_report(text: &str) -> BTreeMap<String, usize> {
    text.lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn normalize_reports_add_up_and_rerun_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.xml", XML_A);
    let b = write(dir.path(), "b.xml", XML_B);
    let out = dir.path().join("out");

    let ra = parse_report(&stdout(&agdt(&["normalize", "--input", s(&a), "--out-dir", s(&out)])));
    let rb = parse_report(&stdout(&agdt(&["normalize", "--input", s(&b), "--out-dir", s(&out)])));
    let both = stdout(&agdt(&[
        "normalize",
        "--input",
        s(&a),
        s(&b),
        "--out-dir",
        s(&out),
        "--jobs",
        "2",
        "--report",
        s(&dir.path().join("report.txt")),
    ]));
    let rab = parse_report(&both);
    for (k, v) in &rab {
        assert_eq!(*v, ra[k] + rb[k], "{k}");
    }
    assert_eq!(fs::read_to_string(dir.path().join("report.txt")).unwrap(), both);
    assert_eq!(rab["apostrophes_changed"], 2);
    assert_eq!(rab["suffixes_stripped"], 2);
    assert_eq!(rab["tokens_split"], 1);

    let again = dir.path().join("again");
    let outputs = [out.join("a.conllu"), out.join("b.conllu")];
    let rerun = stdout(&agdt(&[
        "normalize",
        "--input",
        s(&outputs[0]),
        s(&outputs[1]),
        "--out-dir",
        s(&again),
    ]));
    assert!(parse_report(&rerun).values().all(|v| *v == 0), "{rerun}");
    for name in ["a.conllu", "b.conllu"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap());
    }
}

#[test]
fn malformed_xml_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.xml", "<treebank><sentence>");
    let o = agdt(&["normalize", "--input", s(&bad), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.xml"));
}

#[test]
fn stats_counts_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for k in 1..=3 {
        text.push_str(&format!("# sent_id = s{k}\n"));
        for i in 1..=4 {
            let head = if i == 1 { 0 } else { 1 };
            text.push_str(&format!("{i}\tw{i}\tw{i}\tNOUN\tn-s---mn-\t_\t{head}\tATR\t_\t_\n"));
        }
        text.push('\n');
    }
    let p = write(dir.path(), "doc.conllu", &text);
    let out = stdout(&agdt(&["stats", "--input", s(&p)]));
    assert!(out.contains("doc\t3\t12\n"), "{out}");
    assert!(out.ends_with("total\t3\t12\n"), "{out}");
}

#[test]
fn report_of_constant_scores() {
    let dir = tempfile::tempdir().unwrap();
    // step: deviations of +-1 over ten runs, SD = sqrt(10 / 9)
    let text = format!("const{}\nstep{}\n", "\t96.18".repeat(10), "\t95\t97".repeat(5));
    let p = write(dir.path(), "scores.tsv", &text);
    let out = stdout(&agdt(&["report", "--scores", s(&p)]));
    assert!(
        out.starts_with("model\tF1\nconst\t96.18 (0.00)\nstep\t96.00 (1.05)\n"),
        "{out}"
    );
    assert!(out.contains("\n# F1\npair\tleft\trope\tright\nconst-step\t"), "{out}");
}

#[test]
fn compare_writes_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let scores = "\
A\t80\t81\t82\t80.5\t81.5
B\t79\t80\t81\t79.5\t80
C\t85\t86\t84\t85.5\t85
D\t80\t80\t80\t80\t80
";
    let p = write(dir.path(), "scores.tsv", scores);
    let grids = dir.path().join("grids");
    let out = stdout(&agdt(&[
        "compare",
        "--scores",
        s(&p),
        "--grid-dir",
        s(&grids),
        "--grid-points",
        "21",
    ]));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r.split('\t').next().unwrap()).collect();
    assert_eq!(labels, ["A-B", "A-C", "A-D", "B-C", "B-D", "C-D"]);
    let csv = fs::read_to_string(grids.join("A-C.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert_eq!(fs::read_dir(&grids).unwrap().count(), 6);

    let narrow = stdout(&agdt(&[
        "compare",
        "--scores",
        s(&p),
        "--rope-lo",
        "-0.5",
        "--rope-hi",
        "0.5",
    ]));
    assert_ne!(narrow, out);
    let o = agdt(&["compare", "--scores", s(&p), "--rope-lo", "1", "--rope-hi", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(
        dir.path(),
        "gold.conllu",
        "1\tὁ\tὁ\tDET\tl-s---mn-\t_\t2\tATR\t_\t_\n2\tἀνήρ\tἀνήρ\tNOUN\tn-s---mn-\t_\t0\tPRED\t_\t_\n\n",
    );
    let out = stdout(&agdt(&[
        "eval",
        "--gold",
        s(&gold),
        "--system",
        s(&gold),
        "--format",
        "kv",
    ]));
    assert_eq!(
        out,
        "pos=100.00\nxpos=100.00\nfeats=100.00\nalltags=100.00\nuas=100.00\nlas=100.00\nlemmas=100.00\ntoken_total=2\n"
    );
}

#[test]
fn decode_prints_heads() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.txt", "n=2\n1 -inf 5\n1 4 -inf\n\nn=1\n0 -inf\n");
    let out = stdout(&agdt(&["decode", "--scores", s(&p)]));
    assert_eq!(out, "2 0\t6.0\n0\t0.0\n");
    let multi = stdout(&agdt(&["decode", "--scores", s(&p), "--multi-root"]));
    assert_eq!(multi, "2 0\t6.0\n0\t0.0\n");
}

#[test]
fn split_writes_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (1..=12)
        .map(|k| format!("# sent_id = s{k}\n1\tw\tw\tNOUN\tn-s---mn-\t_\t0\tPRED\t_\t_\n\n"))
        .collect();
    let p = write(dir.path(), "c.conllu", &text);
    let out_dir = dir.path().join("splits");
    let out = stdout(&agdt(&[
        "split",
        "--input",
        s(&p),
        "--seed",
        "9",
        "--out-dir",
        s(&out_dir),
    ]));
    assert_eq!(out, "sentences=12\ntest=2\nfolds=2,2,2,2,2\nruns=10\n");
    let test0 = fs::read(out_dir.join("run-00/test.conllu")).unwrap();
    assert_eq!(test0, fs::read(out_dir.join("run-09/test.conllu")).unwrap());
    let manifest = fs::read(out_dir.join("manifest.txt")).unwrap();
    let again = dir.path().join("again");
    stdout(&agdt(&[
        "split",
        "--input",
        s(&p),
        "--seed",
        "9",
        "--out-dir",
        s(&again),
        "--manifest-only",
    ]));
    assert_eq!(manifest, fs::read(again.join("manifest.txt")).unwrap());
    assert!(!again.join("run-00").exists());
}

#[test]
fn train_mini_on_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.bin");
    let loss = dir.path().join("loss.csv");
    let out = stdout(&agdt(&[
        "train-mini",
        "--toy",
        "4",
        "--epochs",
        "3",
        "--model-out",
        s(&model),
        "--loss-csv",
        s(&loss),
    ]));
    assert!(out.starts_with("epochs=3\nfinal_loss="), "{out}");
    assert!(fs::read(&model).unwrap().starts_with(b"DTHXMINI"));
    assert_eq!(fs::read_to_string(&loss).unwrap().lines().count(), 5);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(agdt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(agdt(&["eval", "--gold", "x"]).status.code(), Some(1));
    assert_eq!(
        agdt(&["split", "--input", "x", "--seed", "-3", "--out-dir", "y"])
            .status
            .code(),
        Some(1)
    );
    let help = agdt(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("train-mini"));
    let missing = agdt(&["stats", "--input", "/nonexistent/file.conllu"]);
    assert_eq!(missing.status.code(), Some(2));
}
