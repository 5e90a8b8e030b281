from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from agentprint import features
from agentprint.corpus import CommitRecord, FileChangeRecord, FileOperation
from agentprint.features import (
    FEATURE_NAMES,
    REGISTRY,
    build_matrix,
    change_gini,
    extract_change_features,
    extract_commit_features,
    extract_patch_features,
    extract_structure_features,
    extract_temporal_features,
    read_matrix_csv,
    write_matrix_csv,
)


def gini_oracle(values):
    """Independent double-sum definition: sum |xi - xj| / (2 n sum x)."""
    n = len(values)
    total = sum(values)
    if n == 0 or total == 0:
        return 0.0
    acc = 0.0
    for xi in values:
        for xj in values:
            acc += abs(xi - xj)
    return acc / (2 * n * total)


def feature_index(name):
    return FEATURE_NAMES.index(name)


def test_registry_shape():
    assert len(REGISTRY) == 53
    counts = {}
    for spec in REGISTRY:
        counts[spec.category] = counts.get(spec.category, 0) + 1
    assert counts == {"Commit": 9, "PRStructure": 9, "CodeChanges": 16,
                      "PatchLevel": 15, "Temporal": 4}


def test_gini_matches_oracle_on_seeded_vectors():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        values = rng.uniform(0, 1e4, size=n)
        assert abs(change_gini(values) - gini_oracle(values)) < 1e-12


def test_gini_known_values():
    assert change_gini([10, 10, 10, 10]) == 0.0
    assert abs(change_gini([100, 0, 0, 0]) - 0.75) < 1e-15
    assert change_gini([]) == 0.0
    assert change_gini([0, 0]) == 0.0


@given(st.lists(st.floats(min_value=0, max_value=1e4), min_size=1, max_size=30),
       st.integers(min_value=2, max_value=10))
def test_gini_scale_invariance(values, scale):
    assert abs(change_gini(values) - change_gini([v * scale for v in values])) < 1e-9


def commit(msg):
    return CommitRecord(message=msg)


def test_commit_features_examples():
    vals = extract_commit_features([commit("feat: a")])
    assert vals[0] == 1 and vals[1] == 1.0 and vals[6] == 0.0
    vals = extract_commit_features([commit("a\n\nb"), commit("c")])
    assert vals[6] == 0.5
    vals = extract_commit_features([commit("Fix"), commit("fix: x")])
    assert vals[7] == 0.5 and vals[1] == 0.5


def test_commit_length_stats_population():
    vals = extract_commit_features([commit("ab"), commit("abcd")])
    assert vals[2] == 3.0 and vals[3] == 2.0 and vals[4] == 4.0
    assert vals[5] == pytest.approx(1.0)  # population std, not sample
    assert vals[8] == 1.0  # one word each


def test_structure_features_examples():
    vals = extract_structure_features("fix: typo", "")
    assert vals[8] == 1.0 and vals[2] == 0.0
    vals = extract_structure_features("t", "- a\n- b\n- c\nsee [d](http://x)")
    assert vals[7] == 3.0 and vals[6] == 1.0
    vals = extract_structure_features("t", "word word")
    assert vals[3] == 2.0 and vals[2] == 9.0


def fc(path, op="modified", additions=0, deletions=0, patch=None):
    return FileChangeRecord(path=path, operation=FileOperation(op),
                            additions=additions, deletions=deletions, patch=patch)


def test_change_features_examples():
    vals = extract_change_features([fc(f"f{i}.py", additions=10) for i in range(4)])
    assert vals[feature_index("change_gini") - 18] == 0.0
    vals = extract_change_features([fc("a.py", additions=100), fc("b.py"),
                                    fc("c.py"), fc("d.py")])
    assert vals[15] == pytest.approx(0.75)
    vals = extract_change_features([fc("src/a.py"), fc("tests/test_a.py")])
    assert vals[3] == 0.5  # test file ratio


def test_change_features_empty():
    assert extract_change_features([]) == [0.0] * 16


def test_extension_entropy_zero_iff_single_extension():
    same = extract_change_features([fc("a.py"), fc("b/c.py")])
    assert same[2] == 0.0
    mixed = extract_change_features([fc("a.py"), fc("b.go")])
    assert mixed[2] > 0.0


def test_change_features_order_invariance():
    files = [fc("src/a.py", additions=5, deletions=2),
             fc("docs/b.md", op="added", additions=10),
             fc("x/y/z.go", op="removed", deletions=7)]
    forward = extract_change_features(files)
    backward = extract_change_features(list(reversed(files)))
    assert forward == backward


def test_file_kind_precedence():
    # tests/config.yaml is a test by path precedence
    vals = extract_change_features([fc("tests/config.yaml")])
    assert vals[3] == 1.0 and vals[4] == 0.0


def test_addition_deletion_ratio_sentinel():
    vals = extract_change_features([fc("a.py")])
    assert vals[14] == 0.0


def test_patch_features_examples():
    assert extract_patch_features([fc("a.py")]) == [0.0] * 15
    patch = "@@ -0,0 +1,2 @@\n+# a\n+x = 1"
    vals = extract_patch_features([fc("a.py", patch=patch)])
    assert vals[8] == 0.5  # comment density
    patch = "@@ -0,0 +1,3 @@\n+if a:\n+  b()\n+for i in r:"
    vals = extract_patch_features([fc("a.py", patch=patch)])
    assert vals[12] == 1.0 and vals[13] == 1.0


def test_patch_indentation_features():
    patch = "@@ -0,0 +1,4 @@\n+\tone\n+  two\n+    four\n+flat"
    vals = extract_patch_features([fc("a.py", patch=patch)])
    assert vals[6] == pytest.approx(1 / 3)  # tab share of indented lines
    assert vals[7] == pytest.approx(3.0)  # mean space indent (2+4)/2
    patch = "@@ -0,0 +1,2 @@\n+trail \n+clean"
    vals = extract_patch_features([fc("a.py", patch=patch)])
    assert vals[5] == 0.5


def test_temporal_features_examples():
    sat = datetime(2025, 1, 4, 10, 0, tzinfo=timezone.utc)
    vals = extract_temporal_features(sat)
    assert vals == [10.0, 1.0, 0.0, 5.0]
    mon = datetime(2025, 1, 6, 10, 0, tzinfo=timezone.utc)
    vals = extract_temporal_features(mon)
    assert vals == [10.0, 0.0, 1.0, 0.0]
    midnight = datetime(2025, 1, 6, 0, 0, tzinfo=timezone.utc)
    assert extract_temporal_features(midnight)[0] == 0.0


def test_business_hours_boundaries():
    mon = datetime(2025, 1, 6, tzinfo=timezone.utc)
    assert extract_temporal_features(mon.replace(hour=8))[2] == 0.0
    assert extract_temporal_features(mon.replace(hour=9))[2] == 1.0
    assert extract_temporal_features(mon.replace(hour=16))[2] == 1.0
    assert extract_temporal_features(mon.replace(hour=17))[2] == 0.0


def test_build_matrix_shape_and_determinism(small_corpus, tmp_path):
    matrix = build_matrix(small_corpus)
    assert matrix.values.shape == (len(small_corpus), 53)
    again = build_matrix(small_corpus)
    assert np.array_equal(matrix.values, again.values)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_matrix_csv(matrix, a)
    write_matrix_csv(again, b)
    assert a.read_bytes() == b.read_bytes()


def test_matrix_csv_round_trip(small_corpus, tmp_path):
    matrix = build_matrix(small_corpus)
    path = tmp_path / "m.csv"
    write_matrix_csv(matrix, path, comment="test artifact")
    loaded = read_matrix_csv(path)
    assert loaded.feature_names == matrix.feature_names
    assert loaded.labels == matrix.labels
    assert loaded.pr_ids == matrix.pr_ids
    np.testing.assert_allclose(loaded.values, matrix.values, rtol=1e-11)


def test_no_nan_and_ratios_bounded(fixture_matrix):
    assert np.all(np.isfinite(fixture_matrix.values))
    for i, spec in enumerate(REGISTRY):
        if spec.unit in ("ratio", "gini", "flag"):
            col = fixture_matrix.values[:, i]
            assert col.min() >= 0.0 and col.max() <= 1.0, spec.name


def test_restrict_preserves_order_and_rejects_unknown(small_corpus):
    matrix = build_matrix(small_corpus)
    sub = matrix.restrict(["change_gini", "commit_count"])
    assert sub.feature_names == ["change_gini", "commit_count"]
    np.testing.assert_array_equal(
        sub.values[:, 1], matrix.values[:, feature_index("commit_count")])
    with pytest.raises(KeyError):
        matrix.restrict(["not_a_feature"])
