use std::path::PathBuf;

use protocompose::corpus::Corpus;
use protocompose::engine::{
    analyze_pair, compose, compose_sequences, InterruptReason, ProtocolSequence, SequenceError,
    Verdict,
};
use protocompose::model::{well_formed, ENV_PARTICIPANT};

fn corpus() -> Corpus {
    Corpus::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")).unwrap()
}

#[test]
fn every_fixture_is_well_formed() {
    let c = corpus();
    for row in &c.rows {
        for file in [&row.p1, &row.p2] {
            let x = c.protocol(file).unwrap();
            assert!(well_formed(&x).is_empty(), "{file}");
        }
    }
}

#[test]
fn table_rows_match_expected_verdicts() {
    let rows = corpus().run().unwrap();
    assert_eq!(rows.iter().filter(|r| r.row.anchor).count(), 8);
    for r in &rows {
        assert!(
            r.matches(),
            "{} / {}: got {} {}, expected {} {}",
            r.row.p1,
            r.row.p2,
            r.report.pe(),
            r.report.pc(),
            r.row.pe,
            r.row.pc
        );
    }
}

#[test]
fn composed_model_present_iff_some_order_succeeds() {
    for r in corpus().run().unwrap() {
        let any_y = r.report.pe().contains('Y') && r.report.pc().contains('Y');
        assert_eq!(
            r.report.composed.is_some(),
            r.report.overall == Verdict::Y,
            "{}",
            r.row.p1
        );
        if let Some(x) = &r.report.composed {
            assert!(any_y);
            assert!(well_formed(x).is_empty());
        }
    }
}

#[test]
fn x509_variants_compose() {
    let c = corpus();
    let (a, b) = (
        c.protocol("x509v1.prot").unwrap(),
        c.protocol("x509v1c.prot").unwrap(),
    );
    let x = compose(&a, &b, &c.ctx);
    assert!(!x.is_empty());
    assert_eq!(x.name, "X509v1_X509v1c");
    assert_eq!(x.node_count(), a.node_count() + b.node_count());
}

#[test]
fn lds_and_kerberos_do_not_compose() {
    let c = corpus();
    let (a, b) = (
        c.protocol("lds.prot").unwrap(),
        c.protocol("kerbv5.prot").unwrap(),
    );
    assert!(compose(&a, &b, &c.ctx).is_empty());
    assert!(compose(&b, &a, &c.ctx).is_empty());
}

#[test]
fn needham_schroeder_must_come_first() {
    let c = corpus();
    let (n, x) = (
        c.protocol("needhs.prot").unwrap(),
        c.protocol("x509v1.prot").unwrap(),
    );
    assert!(!compose(&n, &x, &c.ctx).is_empty());
    assert!(compose(&x, &n, &c.ctx).is_empty());
    let r = analyze_pair(&n, &x, &c.ctx).unwrap();
    assert_eq!(r.pe(), "Y/N");
    assert_eq!(r.composed.unwrap().name, "NeedhS_X509v1");
}

#[test]
fn sequences_without_conflict_compose() {
    let c = corpus();
    let s1 = ProtocolSequence::new(vec![c.protocol("iso9798.prot").unwrap()], c.ctx.clone());
    let s2 = ProtocolSequence::new(vec![c.protocol("x509v1.prot").unwrap()], c.ctx.clone());
    let x = compose_sequences(&s1, &s2).unwrap();
    assert_eq!(x.name, "ISO9798_X509v1");
    assert!(well_formed(&x).is_empty());
}

#[test]
fn replayable_sequences_are_interrupted() {
    let c = corpus();
    let s1 = ProtocolSequence::new(vec![c.protocol("yl.prot").unwrap()], c.ctx.clone());
    let s2 = ProtocolSequence::new(vec![c.protocol("kcv1.prot").unwrap()], c.ctx.clone());
    match compose_sequences(&s1, &s2).unwrap_err() {
        SequenceError::InterruptedExecution { pair, reason, .. } => {
            assert_eq!(pair, ("YL".to_string(), "KCv1".to_string()));
            assert!(matches!(reason, InterruptReason::Replay(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn single_protocol_sequence_is_seeded_with_context() {
    let c = corpus();
    let kc = c.protocol("kcv1.prot").unwrap();
    let alone = |x| ProtocolSequence::new(vec![x], c.ctx.clone());
    let none = ProtocolSequence::new(vec![], c.ctx.clone());
    let x = compose_sequences(&alone(kc.clone()), &none).unwrap();
    assert_eq!(x.name, "KCv1");
    assert_eq!(x.node_count(), kc.node_count());
    let env = x.participant(ENV_PARTICIPANT).unwrap();
    assert!(c
        .ctx
        .terms
        .iter()
        .all(|t| env.eff.iter().any(|e| &e.subject == t)));

    // ISO9798's A needs CON_PARTAUTH(A), which no context provides.
    let iso = c.protocol("iso9798.prot").unwrap();
    assert_eq!(
        compose_sequences(&alone(iso), &none).unwrap_err(),
        SequenceError::NonComposablePair {
            sequence: 1,
            position: 1
        }
    );
}
