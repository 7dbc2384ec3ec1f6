/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_flight_free: (a: number, b: number) => void;
export const betaSweepSvg: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const equilibriumSummary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const flight_summary: (a: number) => [number, number];
export const flight_svg: (a: number) => [number, number];
export const flyHover: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const omegaSweepSvg: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
