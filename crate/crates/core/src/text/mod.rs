//! News-text regression: whitespace vocabulary, a small BERT-style encoder
//! with hand-written backpropagation, masked-token pretraining and the
//! alignment of news items to trading days.

mod attention;
mod encoder;
mod news;
mod tensor;
mod train;
mod vocab;

pub use attention::{scaled_dot_attention, AttentionOutput};
pub use encoder::{
    encoder_forward, masked_loss, masked_loss_and_grad, regression_loss, regression_loss_and_grad, BlockParams, EncoderConfig,
    EncoderOutput, MaskedExample, TextEncoderModel, TextExample,
};
pub use news::{
    align_news_to_days, predict_daily, predict_daily_with, DailyPrediction, DayRecord, NewsItem,
};
pub use tensor::layer_norm_rows;
pub use train::{
    mask_tokens, pretrain_masked, train_text_regressor, PretrainConfig, TextModelConfig,
    TextRegressor,
};
pub use vocab::{build_vocab, normalize, tokenize, TokenSequence, Vocab, CLS, MASK, PAD, SPECIALS, UNK};
