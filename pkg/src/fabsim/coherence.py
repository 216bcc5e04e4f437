"""Device-managed coherence: requester local cache and the device-side
inclusive snoop filter (DCOH) with pluggable victim policies.

Both classes are pure state machines; all timing (cache access cost,
snoop round trips) is charged by the device layer.  The snoop filter
tracks one owner per line: a second requester touching a tracked line
triggers a conflict back-invalidation at the current owner.  Owners may
silently evict, so a snoop can legally find nothing (benign no-data
response); the filter's invalidation counter therefore counts only
snoops that actually hit a cached line.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

CACHELINE = 64

POLICIES = ("FIFO", "LRU", "LFI", "LIFO", "MRU", "BLOCK")


class CoherenceProtocolError(Exception):
    """Simulator bug: the BISnp/BIRsp bookkeeping went inconsistent."""


@dataclass
class VictimPolicy:
    kind: str = "FIFO"
    max_block_len: int = 1        # BLOCK only; 1 degenerates to LIFO

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown victim policy {self.kind!r}")
        if self.kind == "BLOCK" and not 1 <= self.max_block_len <= 4:
            raise ValueError("block length limit must be in [1,4]")


class LocalCache:
    """Fully-associative LRU cache; silent clean and dirty eviction."""

    def __init__(self, capacity_lines, access_time=12):
        self.capacity = capacity_lines
        self.access_time = access_time
        self.entries = OrderedDict()      # addr -> dirty flag
        self.busy_until = 0               # serial lookup port, device layer

    def __contains__(self, addr):
        return addr in self.entries

    def access(self, addr, is_write):
        """Demand access; returns (hit, evicted_addr_or_None)."""
        if addr in self.entries:
            self.entries[addr] = self.entries[addr] or is_write
            self.entries.move_to_end(addr)
            return True, None
        evicted = None
        if len(self.entries) >= self.capacity:
            evicted, _dirty = self.entries.popitem(last=False)
        self.entries[addr] = is_write
        return False, evicted

    def snoop_invalidate(self, addr):
        """Back-invalidation lookup; returns (present, dirty)."""
        if addr in self.entries:
            dirty = self.entries.pop(addr)
            return True, dirty
        return False, False


@dataclass
class SFEntry:
    address: int
    owners: set
    dirty_hint: bool = False
    inserted_seq: int = 0
    last_touch_seq: int = 0
    pending_clear: bool = False


@dataclass
class ActionPlan:
    """What must happen before a request may proceed.

    bisnp: list of (owner_port, [contiguous addresses]) — one
    back-invalidate per owner-run; empty means proceed immediately.
    allocate is the address to insert once all responses are back.
    """
    bisnp: list = field(default_factory=list)
    allocate: int = -1
    conflict: bool = False

    @property
    def proceed(self):
        return not self.bisnp


class SnoopFilter:
    """Inclusive, fully-associative coherence directory."""

    def __init__(self, capacity, policy=None):
        self.capacity = capacity
        self.policy = policy or VictimPolicy("FIFO")
        self.entries = {}                 # addr -> SFEntry
        self.insertion_counts = {}        # addr -> times inserted (LFI)
        self.invalidation_count = 0       # snoops that hit a cached line
        self.bisnp_sent = 0
        self._seq = 0
        self._outstanding = {}            # addr -> set of owners still to answer

    # -- request path -------------------------------------------------

    def on_request(self, addr, owner, is_write=False):
        """Plan for a cacheable demand access from `owner`."""
        e = self.entries.get(addr)
        if e is not None and not e.pending_clear:
            self._seq += 1
            e.last_touch_seq = self._seq
            if owner in e.owners:
                e.dirty_hint = e.dirty_hint or is_write
                return ActionPlan()
            # conflict: current owner must give the line up first
            plan = ActionPlan(bisnp=[(o, [addr]) for o in sorted(e.owners)],
                              allocate=addr, conflict=True)
            self._mark_pending(plan)
            return plan
        if e is not None:
            # entry already being cleared; caller must retry after it is
            raise CoherenceProtocolError(
                f"request for {addr:#x} while its entry is pending clear")
        live = sum(1 for x in self.entries.values() if not x.pending_clear)
        pending = sum(1 for x in self.entries.values() if x.pending_clear)
        if live + pending < self.capacity:
            self.allocate(addr, owner, is_write)
            return ActionPlan()
        victims = self.select_victim()
        plan = ActionPlan(bisnp=self._group_by_owner(victims), allocate=addr)
        self._mark_pending(plan)
        return plan

    def allocate(self, addr, owner, is_write=False):
        if addr in self.entries:
            raise CoherenceProtocolError(f"double allocation of {addr:#x}")
        self._seq += 1
        self.entries[addr] = SFEntry(addr, {owner}, is_write, self._seq, self._seq)
        self.insertion_counts[addr] = self.insertion_counts.get(addr, 0) + 1

    def _mark_pending(self, plan):
        for owner, addrs in plan.bisnp:
            self.bisnp_sent += 1
            for a in addrs:
                self.entries[a].pending_clear = True
                self._outstanding.setdefault(a, set()).add(owner)

    def _group_by_owner(self, victims):
        """Contiguous same-owner runs -> one block invalidation each."""
        groups = []
        for addr in victims:
            owners = sorted(self.entries[addr].owners)
            for o in owners:
                if (groups and groups[-1][0] == o
                        and groups[-1][1][-1] + CACHELINE == addr
                        and len(owners) == 1):
                    groups[-1][1].append(addr)
                else:
                    groups.append((o, [addr]))
        return groups

    # -- response path ------------------------------------------------

    def on_birsp(self, addr, owner, was_cached, dirty):
        """Collect one back-invalidate response; returns True when the
        entry for `addr` is fully cleared."""
        waiting = self._outstanding.get(addr)
        if not waiting or owner not in waiting:
            raise CoherenceProtocolError(
                f"unmatched BIRsp for {addr:#x} from owner {owner}")
        if was_cached:
            self.invalidation_count += 1
        waiting.discard(owner)
        e = self.entries[addr]
        e.owners.discard(owner)
        if waiting:
            return False
        del self._outstanding[addr]
        del self.entries[addr]
        return True

    # -- victim selection ---------------------------------------------

    def select_victim(self):
        """Victim address list: one entry, or a contiguous run for the
        block-length policy."""
        live = [e for e in self.entries.values() if not e.pending_clear]
        if not live:
            raise CoherenceProtocolError("victim selection on an empty filter")
        kind = self.policy.kind
        if kind == "FIFO":
            return [min(live, key=lambda e: e.inserted_seq).address]
        if kind == "LIFO":
            return [max(live, key=lambda e: e.inserted_seq).address]
        if kind == "LRU":
            return [min(live, key=lambda e: e.last_touch_seq).address]
        if kind == "MRU":
            return [max(live, key=lambda e: e.last_touch_seq).address]
        if kind == "LFI":
            # least-frequently-inserted line; ties resolved LIFO
            return [min(live, key=lambda e: (self.insertion_counts[e.address],
                                             -e.inserted_seq)).address]
        return self._select_block_victim(live)

    def _select_block_victim(self, live):
        """Longest run of address-contiguous entries, capped at the block
        length limit; ties resolved LIFO on the run's newest member."""
        limit = self.policy.max_block_len
        by_addr = sorted(live, key=lambda e: e.address)
        runs = []
        run = [by_addr[0]]
        for e in by_addr[1:]:
            if e.address == run[-1].address + CACHELINE:
                run.append(e)
            else:
                runs.append(run)
                run = [e]
        runs.append(run)

        best = None  # (eff_len, newest_seq, -start_addr, window)
        for run in runs:
            eff = min(len(run), limit)
            for start in range(len(run) - eff + 1):
                window = run[start:start + eff]
                key = (eff, max(e.inserted_seq for e in window),
                       -window[0].address)
                if best is None or key > best[0]:
                    best = (key, window)
        return [e.address for e in best[1]]

    # -- introspection ------------------------------------------------

    def occupancy(self):
        return len(self.entries)

    def tracked_lines(self):
        return set(self.entries)
