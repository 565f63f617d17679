//! Feature standardization and the one-vs-all linear SVM.

pub mod standardize;
pub mod svm;

pub use self::standardize::{
    standardize_apply, standardize_fit, standardize_invert, StandardizerModel,
};
pub use self::svm::{
    argmax_label, svm_decision, svm_fit, svm_fit_traced, svm_predict, train_binary, BinarySvm,
    BinaryTrace, SvmModel, SvmTrainConfig,
};
