use crate::corpus::{synthetic, Pretrained, Sentence, Vocab};
use crate::models::{Framework, Model, ModelSpec};
use crate::rng::RngStream;

/// Small dimensions so models build and run quickly in tests.
pub fn tiny_spec(framework: Framework) -> ModelSpec {
    let mut s = ModelSpec::new(framework);
    s.word_dim = 8;
    s.tag_dim = 4;
    s.char_dim = 4;
    s.char_output = 6;
    s.lstm_hidden = 5;
    s.lstm_layers = 2;
    s.tag_mlp = 7;
    s.arc_mlp = 6;
    s.label_mlp = 4;
    s.context_layers = 3;
    s.context_dim = 4;
    s
}

pub fn corpus(count: usize, seed: u64) -> Vec<Sentence> {
    synthetic::treebank(count, &mut RngStream::new(seed))
}

pub fn hetero(count: usize, seed: u64) -> Vec<Sentence> {
    synthetic::hetero_corpus(count, &mut RngStream::new(seed))
}

pub fn build(spec: &ModelSpec, treebank: &[Sentence], hetero: &[Sentence]) -> Model {
    let vocab = Vocab::build(treebank, if spec.use_hetero { hetero } else { &[] }).unwrap();
    Model::new(spec.clone(), vocab, Pretrained::empty(spec.word_dim)).unwrap()
}
