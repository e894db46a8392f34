//! Active-learning support for screening candidate studies in a literature
//! review: a linear SVM ranks unlabeled studies by their tf-idf features so
//! relevant ones surface early.

pub mod active;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod svm;
pub mod synthetic;
pub mod service;
pub mod cli;
