/* tslint:disable */
/* eslint-disable */

export class Flight {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly summary: string;
    readonly svg: string;
}

export function betaSweepSvg(params_text: string, max_deg: number, n: number): string;

export function equilibriumSummary(params_text: string, beta_deg: number, omega: number): string;

export function flyHover(params_text: string, rotating: boolean, beta_deg: number, hover_s: number, perturb_m: number): Flight;

export function omegaSweepSvg(params_text: string, betas_deg: string, max_omega: number, n: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_flight_free: (a: number, b: number) => void;
    readonly betaSweepSvg: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly equilibriumSummary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly flight_summary: (a: number) => [number, number];
    readonly flight_svg: (a: number) => [number, number];
    readonly flyHover: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly omegaSweepSvg: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
