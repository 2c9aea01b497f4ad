from __future__ import annotations

import pytest

from extract_harness.canonicalize import (UNPARSEABLE, canonicalize_answer,
                                          extract_answer)


def test_boxed_extraction_takes_last():
    text = "first \\boxed{1} then finally \\boxed{42}"
    assert extract_answer(text, "boxed") == "42"


def test_boxed_extraction_absent():
    assert extract_answer("no box here", "boxed") is None


def test_mc_letter_extraction():
    assert extract_answer("the answer is (c) because", "mc-letter") == "c"
    assert extract_answer("枝 D.", "mc-letter") == "D"


def test_regex_rule():
    assert extract_answer("result= 17 end", r"regex:result=\s*(\d+)") == "17"
    assert extract_answer("nothing", r"regex:result=(\d+)") is None


def test_unknown_rule_rejected():
    with pytest.raises(ValueError):
        extract_answer("x", "mystery")


def test_whitespace_canonicalization():
    assert canonicalize_answer("  42 ", "boxed") == "42"
    assert canonicalize_answer("42", "boxed") == "42"


def test_numeric_normalization():
    assert canonicalize_answer("+5", "boxed") == "5"
    assert canonicalize_answer("3.50", "boxed") == "3.5"
    assert canonicalize_answer("2.000", "boxed") == "2"
    assert canonicalize_answer("-0.250", "boxed") == "-0.25"


def test_non_numeric_text_is_exact_match():
    assert canonicalize_answer("x+1", "boxed") == "x+1"
    assert canonicalize_answer("a  b", "boxed") == "a b"


def test_choice_letters_uppercased():
    assert canonicalize_answer("c", "mc-letter") == "C"


def test_unparseable_is_reserved():
    assert canonicalize_answer(None, "boxed") == UNPARSEABLE
    assert canonicalize_answer("   ", "boxed") == UNPARSEABLE
