// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/text.hpp"

namespace fraudtext {

// Version en-2023.1. Entries are already in cleaned form: lowercase [a-z]
// only, so contractions appear split ("don", "t").
const WordSet& english_stopwords() {
  static const WordSet words{
      "a",       "about",   "above",   "after",  "again",   "against", "all",     "am",
      "an",      "and",     "any",     "are",    "as",      "at",      "be",      "because",
      "been",    "before",  "being",   "below",  "between", "both",    "but",     "by",
      "can",     "d",       "did",     "do",     "does",    "doing",   "don",     "down",
      "during",  "each",    "few",     "for",    "from",    "further", "had",     "has",
      "have",    "having",  "he",      "her",    "here",    "hers",    "herself", "him",
      "himself", "his",     "how",     "i",      "if",      "in",      "into",    "is",
      "it",      "its",     "itself",  "just",   "ll",      "m",       "me",      "more",
      "most",    "my",      "myself",  "no",     "nor",     "not",     "now",     "o",
      "of",      "off",     "on",      "once",   "only",    "or",      "other",   "our",
      "ours",    "ourselves", "out",   "over",   "own",     "re",      "s",       "same",
      "she",     "should",  "so",      "some",   "such",    "t",       "than",    "that",
      "the",     "their",   "theirs",  "them",   "themselves", "then", "there",   "these",
      "they",    "this",    "those",   "through", "to",     "too",     "under",   "until",
      "up",      "ve",      "very",    "was",    "we",      "were",    "what",    "when",
      "where",   "which",   "while",   "who",    "whom",    "why",     "will",    "with",
      "won",     "y",       "you",     "your",   "yours",   "yourself", "yourselves",
  };
  return words;
}

}  // namespace fraudtext
