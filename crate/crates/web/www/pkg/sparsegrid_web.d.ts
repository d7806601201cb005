/* tslint:disable */
/* eslint-disable */

/**
 * Linear state estimate of one random operating point with the greedy
 * observable placement and `tve_pct` percent TVE noise.
 */
export function linear_estimate(tve_pct: number, seed: number): string;

/**
 * Voltage profile of the 34-bus feeder with every load scaled by
 * `load_scale` and every DG by `dg_scale`.
 */
export function power_flow(load_scale: number, dg_scale: number): string;

/**
 * Feasibility of a switch status string (`1` closed, `0` open) on the
 * switchable feeder, with the full feasible list.
 */
export function switch_feasibility(bits: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly linear_estimate: (a: number, b: number) => [number, number];
    readonly power_flow: (a: number, b: number) => [number, number];
    readonly switch_feasibility: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
