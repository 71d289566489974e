use agdt_core::ingest::{read_conllu, write_conllu};
use agdt_core::mini::{read_model, render_loss_csv, toy_corpus, train, write_model, MiniConfig, MiniModel, Vocab};
use agdt_core::validate_tree;

#[test]
fn trained_model_survives_serialization() {
    let corpus = toy_corpus(5, 8);
    let mut config = MiniConfig::tiny(5);
    config.epochs = 4;
    let model = MiniModel::new(config, Vocab::from_corpus(&corpus)).unwrap();
    let (model, trace) = train(model, &corpus).unwrap();
    assert_eq!(trace.len(), 5);
    assert_eq!(render_loss_csv(&trace).lines().count(), 6);

    let bytes = write_model(&model);
    let back = read_model(&bytes).unwrap();
    assert_eq!(back.params(), model.params());
    assert_eq!(write_model(&back), bytes);
    for s in &corpus {
        let a = model.annotate(s);
        assert_eq!(a, back.annotate(s));
        assert!(validate_tree(&a, true).is_ok());
    }
}

#[test]
fn truncated_model_is_rejected() {
    let corpus = toy_corpus(6, 3);
    let model = MiniModel::new(MiniConfig::tiny(1), Vocab::from_corpus(&corpus)).unwrap();
    let bytes = write_model(&model);
    assert!(read_model(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(read_model(&wrong).is_err());
}

#[test]
fn annotations_round_trip_through_conllu() {
    let corpus = toy_corpus(8, 5);
    let model = MiniModel::new(MiniConfig::tiny(2), Vocab::from_corpus(&corpus)).unwrap();
    let annotated: Vec<_> = corpus.iter().map(|s| model.annotate(s)).collect();
    assert_eq!(read_conllu(&write_conllu(&annotated)).unwrap(), annotated);
}
