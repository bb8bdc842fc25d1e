/* Compatibility shim: real TFHE programs often include this alongside
 * tfhe.h. The stub keeps everything in one public header. */
#ifndef TFHE_STUB_TFHE_IO_H
#define TFHE_STUB_TFHE_IO_H

#include <tfhe/tfhe.h>

#endif /* TFHE_STUB_TFHE_IO_H */
