#include <stdio.h>
extern _Bool nondet_bool(void);
extern int nondet_int(void);
extern void __VERIFIER_assert(int);

int g = 0;

int main(void) {
    int a = nondet_int();
    int b;
    _Bool pStored0 = 0;
    int oa = 0;
    while (a > 0) {
        printf("RSI loop 0");
        _Bool flag0 = nondet_bool();
        if (pStored0) {
            __VERIFIER_assert(!(oa == a));
        }
        if (flag0 && !pStored0) {
            oa = a;
            pStored0 = 1;
        }
        a = a - 1;
        printf("assert disabled: a >= 0");
    }
    _Bool pStored1 = 0;
    int og = 0;
    int ob = 0;
    for (b = 0; b < 3; b++) {
        printf("RSI loop 1");
        _Bool flag1 = nondet_bool();
        if (pStored1) {
            __VERIFIER_assert(!(og == g && ob == b));
        }
        if (flag1 && !pStored1) {
            og = g;
            ob = b;
            pStored1 = 1;
        }
        g = g + b;
    }
    return g;
}
