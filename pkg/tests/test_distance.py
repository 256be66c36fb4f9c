from hypothesis import given
from hypothesis import strategies as st

from cohortql.distance import levenshtein, nearest

words = st.text(alphabet="abcxyz", max_size=12)


def test_known_values():
    assert levenshtein("", "") == 0
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("abc", "") == 3
    assert levenshtein("", "xy") == 2
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("flaw", "lawn") == 2
    assert levenshtein("Modalty", "Modality") == 1


def test_unicode_code_points():
    assert levenshtein("tête", "tete") == 1
    assert levenshtein("Ärzte", "arzte") == 1  # Ä→a is a single substitution


@given(words, words)
def test_symmetry(a, b):
    assert levenshtein(a, b) == levenshtein(b, a)


@given(words, words)
def test_bounds(a, b):
    d = levenshtein(a, b)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))


@given(words)
def test_identity(a):
    assert levenshtein(a, a) == 0


@given(words, words, words)
def test_triangle_inequality(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@given(words, words)
def test_identity_of_indiscernibles(a, b):
    assert (levenshtein(a, b) == 0) == (a == b)


def test_nearest_basic():
    cols = ["PatientID", "Modality", "SeriesDescription"]
    assert nearest("Modalty", cols) == "Modality"
    assert nearest("patientid", cols) == "PatientID"  # case-insensitive match


def test_nearest_cutoff():
    assert nearest("completely_else", ["Modality"]) is None
    assert nearest("abcd", ["abcdefgh"], max_distance=3) is None
    assert nearest("abcd", ["abcdefg"], max_distance=3) == "abcdefg"


def test_nearest_prefers_earlier_candidate_on_tie():
    assert nearest("ab", ["axb", "ayb"]) == "axb"


def test_nearest_returns_schema_casing():
    assert nearest("MODALITY", ["Modality"]) == "Modality"
