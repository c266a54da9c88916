from __future__ import annotations

from grounding_adapter.parse import parse_object_list


def test_numbered_list():
    resp = parse_object_list("1. chair\n2. wooden table")
    assert list(resp.parsed_labels) == ["chair", "wooden table"]


def test_comma_separated_with_articles():
    resp = parse_object_list("a lamp, the chair, an ottoman")
    assert list(resp.parsed_labels) == ["lamp", "chair", "ottoman"]


def test_dedup_preserves_order():
    resp = parse_object_list("chair, chair")
    assert list(resp.parsed_labels) == ["chair"]


def test_counts_stripped():
    resp = parse_object_list("two chairs\n3 lamps\nseveral books")
    assert list(resp.parsed_labels) == ["chairs", "lamps", "books"]


def test_bullets_and_case():
    resp = parse_object_list("- Sofa\n* TV Stand\n• Rug.")
    assert list(resp.parsed_labels) == ["sofa", "tv stand", "rug"]


def test_empty_text():
    assert parse_object_list("").parsed_labels == ()


def test_labels_lowercase_trimmed_nonempty():
    resp = parse_object_list("  CHAIR  \n\n , ;\nThe TABLE.")
    assert all(lab == lab.lower() == lab.strip() and lab for lab in resp.parsed_labels)
    assert list(resp.parsed_labels) == ["chair", "table"]
