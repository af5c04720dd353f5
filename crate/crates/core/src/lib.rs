pub mod cli;
pub mod corpus;
pub mod error;
pub mod evalreport;
pub mod hybrid;
pub mod imagechannel;
pub mod learners;
pub mod namefeat;
pub mod profilefeat;
pub mod tweetfeat;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/basic-features.md")]
    mod basic_features {}
    #[doc = include_str!("../../../book/src/tweet-features.md")]
    mod tweet_features {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    mod hybrid {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
