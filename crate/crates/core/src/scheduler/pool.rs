use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::pricing::{InstanceId, PricingKind, VmInstance, VmTypeSpec};
use crate::workflow::{Task, TaskRef};
use crate::HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmStatus {
    Free,
    Busy(TaskRef),
    Released,
}

/// Every instance ever hired plus the free/busy split of the live ones.
///
/// Ids are dense: `InstanceId(i)` is the `i`-th hire. Released instances stay
/// in the ledger for billing and validation but appear in neither set.
/// Reserved instances hired ahead of demand start as unclaimed slots: they
/// are live and billed but invisible to in-stock selection until claimed.
#[derive(Debug, Clone)]
pub struct VmPool {
    instances: Vec<VmInstance>,
    status: Vec<VmStatus>,
    free: BTreeSet<InstanceId>,
    busy: BTreeMap<InstanceId, TaskRef>,
    slots: BTreeSet<InstanceId>,
    cumulative_score: Vec<f64>,
    type_freq: BTreeMap<String, u64>,
}

impl VmPool {
    pub fn new(catalog_len: usize) -> Self {
        VmPool {
            instances: Vec::new(),
            status: Vec::new(),
            free: BTreeSet::new(),
            busy: BTreeMap::new(),
            slots: BTreeSet::new(),
            cumulative_score: alloc::vec![0.0; catalog_len],
            type_freq: BTreeMap::new(),
        }
    }

    /// Hires a fresh instance for `hours` starting at `now`; it joins the free set.
    pub fn rent(
        &mut self,
        catalog: &[VmTypeSpec],
        vm_type: usize,
        kind: PricingKind,
        now: f64,
        hours: f64,
        rate: f64,
    ) -> InstanceId {
        let id = InstanceId(self.instances.len() as u32);
        let vm = VmInstance::new(
            id,
            vm_type,
            &catalog[vm_type],
            kind,
            now,
            now + hours * HOUR,
            rate,
        );
        self.instances.push(vm);
        self.status.push(VmStatus::Free);
        self.free.insert(id);
        id
    }

    /// Hires a reserved instance as an unclaimed slot.
    pub fn reserve_slot(
        &mut self,
        catalog: &[VmTypeSpec],
        vm_type: usize,
        now: f64,
        hours: f64,
    ) -> InstanceId {
        let rate = catalog[vm_type].price_reserved;
        let id = self.rent(catalog, vm_type, PricingKind::Reserved, now, hours, rate);
        self.free.remove(&id);
        self.slots.insert(id);
        id
    }

    pub fn slots(&self) -> impl Iterator<Item = &VmInstance> + '_ {
        self.slots.iter().map(|&id| self.get(id))
    }

    /// Moves an unclaimed slot into the free set.
    pub fn claim(&mut self, id: InstanceId) {
        if self.slots.remove(&id) {
            self.free.insert(id);
        }
    }

    pub fn get(&self, id: InstanceId) -> &VmInstance {
        &self.instances[id.0 as usize]
    }

    pub fn status(&self, id: InstanceId) -> VmStatus {
        self.status[id.0 as usize]
    }

    pub fn is_free(&self, id: InstanceId) -> bool {
        self.free.contains(&id)
    }

    pub fn free_ids(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.free.iter().copied()
    }

    pub fn free_vms(&self) -> impl Iterator<Item = &VmInstance> + '_ {
        self.free.iter().map(|&id| self.get(id))
    }

    pub fn busy(&self) -> &BTreeMap<InstanceId, TaskRef> {
        &self.busy
    }

    /// Free and busy instances in id order.
    pub fn active(&self) -> impl Iterator<Item = &VmInstance> + '_ {
        self.instances
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| **s != VmStatus::Released)
            .map(|(vm, _)| vm)
    }

    /// Full hire ledger, including released instances.
    pub fn ledger(&self) -> &[VmInstance] {
        &self.instances
    }

    pub fn into_ledger(self) -> Vec<VmInstance> {
        self.instances
    }

    pub fn cumulative_score(&self, vm_type: usize) -> f64 {
        self.cumulative_score[vm_type]
    }

    pub fn type_frequency(&self, task_type: &str) -> u64 {
        self.type_freq.get(task_type).copied().unwrap_or(0)
    }

    /// Whether `task` would need a cold start on `id`.
    pub fn needs_cold_start(&self, id: InstanceId, task: &Task) -> bool {
        !self.get(id).is_warm_for(&task.task_type)
    }

    /// Moves `id` from free to busy hosting `task`, loads its environment and
    /// credits `reward` to the type's cumulative score. Returns the cold flag.
    pub fn assign(&mut self, id: InstanceId, tref: TaskRef, task: &Task, reward: f64) -> bool {
        let removed = self.free.remove(&id);
        debug_assert!(removed, "{id} is not free");
        self.busy.insert(id, tref);
        self.status[id.0 as usize] = VmStatus::Busy(tref);

        let freq = self.type_freq.entry(task.task_type.clone()).or_insert(0);
        *freq += 1;
        let freq = *freq;

        let vm = &mut self.instances[id.0 as usize];
        let cold = !vm.is_warm_for(&task.task_type);
        if cold {
            vm.warm_type = Some(task.task_type.clone());
        }
        vm.last_task_freq = freq;
        vm.last_task_penalty = task.cold_start_mi;
        self.cumulative_score[vm.vm_type] += reward;
        cold
    }

    /// The hosted task finished at `now`.
    pub fn finish(&mut self, id: InstanceId, now: f64) {
        if self.busy.remove(&id).is_some() {
            self.free.insert(id);
            self.status[id.0 as usize] = VmStatus::Free;
            self.instances[id.0 as usize].last_use = now;
        }
    }

    /// Extends the rental window of a live instance by `hours`.
    pub fn renew(&mut self, id: InstanceId, hours: f64) {
        debug_assert_ne!(self.status(id), VmStatus::Released);
        self.instances[id.0 as usize].rent_end += hours * HOUR;
    }

    /// Takes `id` out of the pool; its window is truncated to `at` when that is
    /// earlier (revocation). The environment is discarded.
    pub fn release(&mut self, id: InstanceId, at: f64) {
        let idx = id.0 as usize;
        self.free.remove(&id);
        self.busy.remove(&id);
        self.slots.remove(&id);
        self.status[idx] = VmStatus::Released;
        let vm = &mut self.instances[idx];
        if at < vm.rent_end {
            vm.rent_end = libm::fmax(at, vm.rent_start);
        }
        vm.warm_type = None;
    }

    /// Live free instances and slots whose window has ended by `now`.
    pub fn expiring(&self, now: f64) -> Vec<InstanceId> {
        self.free
            .union(&self.slots)
            .copied()
            .filter(|&id| self.get(id).rent_end <= now + 1e-9)
            .collect()
    }
}
