/* tslint:disable */
/* eslint-disable */

/**
 * Column traces of one scenario run, decimated for plotting.
 */
export class Trace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    gamma(): Float64Array;
    gamma_d(): Float64Array;
    /**
     * `"PASS"`, `"FAIL"` or `"FELL"`.
     */
    outcome(): string;
    psi(): Float64Array;
    report(): string;
    split(): Float64Array;
    t(): Float64Array;
    theta(): Float64Array;
    v_d(): Float64Array;
    x_dot(): Float64Array;
}

export function closed_loop_poles(config_toml: string, leg_length: number): Float64Array;

export function gain_curve(config_toml: string, row: number, col: number): Float64Array;

export function scenario_names(): string[];

/**
 * Runs a built-in scenario and returns its traces and report.
 */
export function simulate(config_toml: string, name: string, seed: number, noise: string): Trace;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trace_free: (a: number, b: number) => void;
    readonly closed_loop_poles: (a: number, b: number, c: number) => [number, number, number, number];
    readonly gain_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scenario_names: () => [number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly trace_gamma: (a: number) => [number, number];
    readonly trace_gamma_d: (a: number) => [number, number];
    readonly trace_outcome: (a: number) => [number, number];
    readonly trace_psi: (a: number) => [number, number];
    readonly trace_report: (a: number) => [number, number];
    readonly trace_split: (a: number) => [number, number];
    readonly trace_t: (a: number) => [number, number];
    readonly trace_theta: (a: number) => [number, number];
    readonly trace_v_d: (a: number) => [number, number];
    readonly trace_x_dot: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
