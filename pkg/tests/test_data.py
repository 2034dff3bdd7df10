import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperevent.data import (
    Dataset,
    NodeTable,
    load_events,
    load_nodes,
    synthetic_nodes,
    tie_grouping,
    time_increments,
    write_events,
    write_nodes,
)
from hyperevent.errors import (
    ConfigError,
    DataValidationError,
    DuplicateLabelError,
    EmptyReceiverError,
    SelfReceiverError,
    TimestampError,
    UnknownLabelError,
)

NODE_CSV = "label,gender_female,is_manager\n"
EVENT_CSV = "timestamp,sender,receivers\n"


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _nodes18(tmp_path):
    rows = "".join(f"m{k:02d},{k % 2},{int(k == 0)}\n" for k in range(18))
    return load_nodes(_write(tmp_path, "nodes.csv", NODE_CSV + rows))


class TestLoadNodes:
    def test_18_row_table(self, tmp_path):
        nodes = _nodes18(tmp_path)
        assert nodes.n_nodes == 18
        assert nodes.is_manager.sum() == 1
        assert nodes.gender_female.sum() == 9

    def test_minimal_two_rows(self, tmp_path):
        nodes = load_nodes(_write(tmp_path, "n.csv", NODE_CSV + "a,0,0\nb,1,0\n"))
        assert nodes.n_nodes == 2
        assert nodes.index_of("b") == 1

    def test_duplicate_label_rejected(self, tmp_path):
        path = _write(tmp_path, "n.csv", NODE_CSV + "finance,0,0\nfinance,1,0\n")
        with pytest.raises(DuplicateLabelError):
            load_nodes(path)

    def test_missing_column_rejected(self, tmp_path):
        path = _write(tmp_path, "n.csv", "label,gender_female\na,0\nb,1\n")
        with pytest.raises(DataValidationError, match="missing column"):
            load_nodes(path)

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(DataValidationError, match="empty"):
            load_nodes(_write(tmp_path, "n.csv", NODE_CSV))

    def test_non_binary_attribute_rejected(self, tmp_path):
        path = _write(tmp_path, "n.csv", NODE_CSV + "a,yes,0\nb,1,0\n")
        with pytest.raises(DataValidationError):
            load_nodes(path)

    def test_single_row_rejected(self, tmp_path):
        with pytest.raises(DataValidationError):
            load_nodes(_write(tmp_path, "n.csv", NODE_CSV + "a,0,0\n"))


class TestLoadEvents:
    def test_small_log(self, tmp_path):
        nodes = _nodes18(tmp_path)
        rows = "1.5,m00,m01;m02\n2.0,m01,m00\n"
        ds = load_events(_write(tmp_path, "e.csv", EVENT_CSV + rows), nodes, 0.0)
        assert ds.n_events == 2
        assert ds.senders.tolist() == [0, 1]
        assert ds.receivers[0].sum() == 2

    def test_single_event(self, tmp_path):
        nodes = synthetic_nodes(2)
        ds = load_events(_write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,n001\n"), nodes, 0.0)
        assert ds.n_events == 1

    def test_self_receiver_rejected(self, tmp_path):
        nodes = synthetic_nodes(3)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,n001;n000\n")
        with pytest.raises(SelfReceiverError):
            load_events(path, nodes, 0.0)

    def test_unknown_label_rejected(self, tmp_path):
        nodes = synthetic_nodes(2)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,ghost\n")
        with pytest.raises(UnknownLabelError):
            load_events(path, nodes, 0.0)

    def test_empty_receivers_rejected(self, tmp_path):
        nodes = synthetic_nodes(2)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,\n")
        with pytest.raises(EmptyReceiverError):
            load_events(path, nodes, 0.0)

    def test_timestamp_before_t0_rejected(self, tmp_path):
        nodes = synthetic_nodes(2)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,n001\n")
        with pytest.raises(TimestampError):
            load_events(path, nodes, 5.0)

    def test_repeated_receiver_rejected(self, tmp_path):
        nodes = synthetic_nodes(3)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "1.0,n000,n001;n001\n")
        with pytest.raises(DataValidationError, match="repeated"):
            load_events(path, nodes, 0.0)

    def test_stable_sort_preserves_file_order_within_ties(self, tmp_path):
        nodes = synthetic_nodes(4)
        rows = "2.0,n001,n000\n1.0,n000,n001\n2.0,n002,n000\n"
        ds = load_events(_write(tmp_path, "e.csv", EVENT_CSV + rows), nodes, 0.0)
        assert ds.senders.tolist() == [0, 1, 2]

    def test_iso_timestamps_need_epoch(self, tmp_path):
        nodes = synthetic_nodes(2)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "2012-03-01T12:00:00,n000,n001\n")
        with pytest.raises(ConfigError):
            load_events(path, nodes, 0.0)

    def test_iso_timestamps_convert_to_hours(self, tmp_path):
        from datetime import datetime

        nodes = synthetic_nodes(2)
        epoch = datetime(2012, 3, 1)
        path = _write(tmp_path, "e.csv", EVENT_CSV + "2012-03-01T12:00:00,n000,n001\n")
        ds = load_events(path, nodes, 0.0, epoch)
        assert ds.times[0] == 12.0


class TestRoundTrip:
    def test_write_then_load_identical(self, tmp_path, rng):
        nodes = synthetic_nodes(6)
        e = 40
        senders = rng.integers(0, 6, e)
        receivers = np.zeros((e, 6), np.uint8)
        for k in range(e):
            choices = rng.choice(np.delete(np.arange(6), senders[k]), size=rng.integers(1, 4), replace=False)
            receivers[k, choices] = 1
        times = np.sort(rng.uniform(0.019, 500.0, e))
        ds = Dataset(senders, receivers, times, 0.0, nodes)
        path = tmp_path / "events.csv"
        write_events(ds, path)
        back = load_events(path, nodes, 0.0)
        assert np.array_equal(back.senders, ds.senders)
        assert np.array_equal(back.receivers, ds.receivers)
        assert np.array_equal(back.times, ds.times)

    def test_nodes_round_trip(self, tmp_path):
        nodes = NodeTable(("a", "b", "c"), np.array([1, 0, 1], bool), np.array([0, 0, 1], bool))
        path = tmp_path / "nodes.csv"
        write_nodes(nodes, path)
        back = load_nodes(path)
        assert back.labels == nodes.labels
        assert np.array_equal(back.gender_female, nodes.gender_female)
        assert np.array_equal(back.is_manager, nodes.is_manager)


def _dataset_from_times(times, a=3):
    nodes = synthetic_nodes(a)
    e = len(times)
    senders = np.zeros(e, np.int64)
    receivers = np.zeros((e, a), np.uint8)
    receivers[:, 1] = 1
    return Dataset(senders, receivers, np.asarray(times, float), 0.0, nodes)


class TestIncrements:
    def test_direct_subtraction(self):
        ds = _dataset_from_times([1.0, 3.5])
        assert time_increments(ds).tolist() == [1.0, 2.5]

    def test_tie_produces_zero(self):
        ds = _dataset_from_times([2.0, 2.0, 5.0])
        assert time_increments(ds).tolist() == [2.0, 0.0, 3.0]

    @given(st.lists(st.floats(min_value=0.001, max_value=1e4), min_size=1, max_size=60))
    def test_telescoping_sum(self, raw):
        times = np.sort(np.asarray(raw))
        ds = _dataset_from_times(times)
        total = time_increments(ds).sum()
        assert total == pytest.approx(times[-1] - 0.0, rel=1e-12)

    def test_zero_iff_shared_tie_group(self, rng):
        times = np.sort(rng.choice(np.arange(1.0, 9.0), size=30, replace=True))
        ds = _dataset_from_times(times)
        inc = time_increments(ds)
        groups = tie_grouping(ds)
        same_group_as_prev = np.zeros(30, bool)
        same_group_as_prev[1:] = groups.group_of[1:] == groups.group_of[:-1]
        assert np.array_equal(inc == 0.0, same_group_as_prev)


class TestTieGrouping:
    def test_singletons(self):
        ds = _dataset_from_times([1.0, 2.0, 3.0])
        g = tie_grouping(ds)
        assert g.n_groups == 3
        assert all(len(grp) == 1 for grp in g.groups)

    def test_tied_pair(self):
        ds = _dataset_from_times([1.0, 1.0, 2.0])
        g = tie_grouping(ds)
        assert g.n_groups == 2
        assert g.groups[0].tolist() == [0, 1]
        assert g.groups[1].tolist() == [2]

    @given(st.lists(st.integers(min_value=1, max_value=8), min_size=1, max_size=50))
    def test_groups_partition_events(self, raw):
        times = np.sort(np.asarray(raw, dtype=float))
        ds = _dataset_from_times(times)
        g = tie_grouping(ds)
        recovered = np.concatenate(g.groups)
        assert sorted(recovered.tolist()) == list(range(len(times)))
        for m, grp in enumerate(g.groups):
            assert np.all(ds.times[grp] == g.times[m])


class TestDatasetInvariants:
    def test_rejects_unsorted(self):
        nodes = synthetic_nodes(3)
        r = np.zeros((2, 3), np.uint8)
        r[:, 1] = 1
        with pytest.raises(DataValidationError):
            Dataset(np.zeros(2, np.int64), r, np.array([2.0, 1.0]), 0.0, nodes)

    def test_rejects_empty_receiver_row(self):
        nodes = synthetic_nodes(3)
        with pytest.raises(EmptyReceiverError):
            Dataset(np.zeros(1, np.int64), np.zeros((1, 3), np.uint8), np.array([1.0]), 0.0, nodes)

    def test_empty_dataset_is_legal(self):
        nodes = synthetic_nodes(3)
        ds = Dataset(np.zeros(0, np.int64), np.zeros((0, 3), np.uint8), np.zeros(0), 0.0, nodes)
        assert ds.n_events == 0
